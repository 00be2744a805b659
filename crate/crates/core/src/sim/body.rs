use serde::{Deserialize, Serialize};

use super::mesh::{floor_grid, icosphere, subdivided_box, TriMesh};
use crate::features::PhysicalParams;
use crate::geometry::{Mat3, Quaternion, Vec3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("object {object} reached speed {speed} m/step, above the cap {cap}")]
    NumericalBlowup { object: usize, speed: f64, cap: f64 },
    #[error("could not place {objects} objects without overlap in {attempts} attempts")]
    PlacementFailure { objects: usize, attempts: usize },
    #[error("invalid object spec: {0}")]
    InvalidSpec(String),
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Sphere { radius: f64, subdivision: u32 },
    Box { half_extents: Vec3, subdivision: u32 },
    /// Static ground: the plane `z = 0` of its body frame, meshed as a grid.
    Plane { half_size: f64, tiles: u32 },
}

impl Shape {
    pub fn mesh(&self) -> TriMesh {
        match *self {
            Shape::Sphere { radius, subdivision } => icosphere(radius, subdivision),
            Shape::Box { half_extents, subdivision } => subdivided_box(half_extents, subdivision),
            Shape::Plane { half_size, tiles } => floor_grid(half_size, tiles as usize),
        }
    }

    /// Radius of the smallest origin-centered ball containing the shape.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Sphere { radius, .. } => radius,
            Shape::Box { half_extents, .. } => half_extents.norm(),
            Shape::Plane { half_size, .. } => half_size * 2f64.sqrt(),
        }
    }

    /// Body-frame inertia tensor of a solid of mass `m`.
    pub fn inertia(&self, m: f64) -> Mat3 {
        match *self {
            Shape::Sphere { radius, .. } => Mat3::diagonal(Vec3::splat(0.4 * m * radius * radius)),
            Shape::Box { half_extents: h, .. } => Mat3::diagonal(Vec3::new(
                m * (h.y * h.y + h.z * h.z) / 3.0,
                m * (h.x * h.x + h.z * h.z) / 3.0,
                m * (h.x * h.x + h.y * h.y) / 3.0,
            )),
            Shape::Plane { .. } => Mat3::ZERO,
        }
    }
}

/// One rigid object: analytic shape, physical parameters, canonical mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: Shape,
    pub mass: f64,
    pub friction: f64,
    pub restitution: f64,
    pub is_static: bool,
    pub mesh: TriMesh,
}

impl ObjectSpec {
    pub fn new(shape: Shape, mass: f64, friction: f64, restitution: f64, is_static: bool) -> Self {
        Self { shape, mass, friction, restitution, is_static, mesh: shape.mesh() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !self.is_static && !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(SimError::InvalidSpec(format!("dynamic mass must be positive, got {}", self.mass)));
        }
        if !(0.0..=1.0).contains(&self.restitution) {
            return Err(SimError::InvalidSpec(format!("restitution {} outside [0, 1]", self.restitution)));
        }
        if !(self.friction >= 0.0) {
            return Err(SimError::InvalidSpec(format!("friction {} is negative", self.friction)));
        }
        if matches!(self.shape, Shape::Plane { .. }) && !self.is_static {
            return Err(SimError::InvalidSpec("planes must be static".into()));
        }
        Ok(())
    }

    pub fn physical(&self) -> PhysicalParams {
        PhysicalParams {
            mass: self.mass,
            friction: self.friction,
            restitution: self.restitution,
            is_static: self.is_static,
        }
    }

    pub fn inverse_mass(&self) -> f64 {
        if self.is_static {
            0.0
        } else {
            1.0 / self.mass
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quaternion,
}

impl Pose {
    pub const IDENTITY: Pose = Pose { position: Vec3::ZERO, orientation: Quaternion::IDENTITY };

    pub fn new(position: Vec3, orientation: Quaternion) -> Self {
        Self { position, orientation }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.orientation.rotate(p) + self.position
    }

    /// Inverse transform of a world point into the body frame.
    pub fn to_local(&self, p: Vec3) -> Vec3 {
        self.orientation.conjugate().rotate(p - self.position)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && [self.orientation.w, self.orientation.x, self.orientation.y, self.orientation.z]
                .iter()
                .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub pose: Pose,
    /// m/step
    pub velocity: Vec3,
    /// rad/step, world frame
    pub angular_velocity: Vec3,
}

impl BodyState {
    pub fn at_rest(pose: Pose) -> Self {
        Self { pose, velocity: Vec3::ZERO, angular_velocity: Vec3::ZERO }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub bodies: Vec<BodyState>,
    /// m/step²
    pub gravity: Vec3,
    pub step: u64,
}

impl SimState {
    pub fn poses(&self) -> Vec<Pose> {
        self.bodies.iter().map(|b| b.pose).collect()
    }
}

/// World-frame inverse inertia.
pub fn inverse_inertia_world(spec: &ObjectSpec, q: Quaternion) -> Mat3 {
    if spec.is_static {
        return Mat3::ZERO;
    }
    let d = spec.shape.inertia(spec.mass);
    let inv = Mat3::diagonal(Vec3::new(1.0 / d.m[0][0], 1.0 / d.m[1][1], 1.0 / d.m[2][2]));
    let r = q.to_matrix();
    r * inv * r.transpose()
}

pub fn inertia_world(spec: &ObjectSpec, q: Quaternion) -> Mat3 {
    let r = q.to_matrix();
    r * spec.shape.inertia(spec.mass) * r.transpose()
}

/// Discrete mechanical energy of the dynamic bodies:
/// `Σ ½m|v|² + ½ωᵀIω − m g·x + ½ m g·v`.
///
/// The last term makes the semi-implicit update `v ← v + g, x ← x + v`
/// conserve this quantity exactly in free flight.
pub fn mechanical_energy(state: &SimState, specs: &[ObjectSpec]) -> f64 {
    let g = state.gravity;
    state
        .bodies
        .iter()
        .zip(specs)
        .filter(|(_, s)| !s.is_static)
        .map(|(b, s)| {
            let w = b.angular_velocity;
            let rot = 0.5 * w.dot(inertia_world(s, b.pose.orientation) * w);
            s.mass * (0.5 * b.velocity.norm_squared() - g.dot(b.pose.position) + 0.5 * g.dot(b.velocity)) + rot
        })
        .sum()
}
