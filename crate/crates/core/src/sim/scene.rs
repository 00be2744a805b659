//! Seeded procedural scenes: a static floor plus randomly shaped, placed
//! and launched dynamic objects.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::body::{BodyState, ObjectSpec, Pose, Shape, SimError, SimState};
use super::step::DEFAULT_GRAVITY;
use crate::geometry::{Quaternion, Vec3};

pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

/// Inclusive `[lo, hi]` range.
pub type Range2 = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub min_objects: usize,
    pub max_objects: usize,
    /// Probability that a dynamic object is a sphere; otherwise a cube.
    pub sphere_probability: f64,
    pub sphere_radius: Range2,
    pub cube_half_extent: Range2,
    pub sphere_subdivision: u32,
    pub box_subdivision: u32,
    pub mass: Range2,
    pub friction: Range2,
    pub restitution: Range2,
    /// Objects spawn with centers in `[−w, w]²`.
    pub spawn_half_width: f64,
    /// Clearance between an object's bounding ball and the floor at spawn.
    pub spawn_clearance: Range2,
    /// Minimum gap between bounding balls at spawn.
    pub min_gap: f64,
    /// Horizontal launch speed, aimed roughly at the scene center (m/step).
    pub speed: Range2,
    pub vertical_speed: Range2,
    /// rad/step
    pub angular_speed: Range2,
    pub floor_half_size: f64,
    pub floor_tiles: u32,
    pub floor_friction: f64,
    pub floor_restitution: f64,
    pub gravity: Vec3,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            min_objects: 2,
            max_objects: 6,
            sphere_probability: 0.5,
            sphere_radius: [0.4, 0.7],
            cube_half_extent: [0.3, 0.55],
            sphere_subdivision: 1,
            box_subdivision: 1,
            mass: [0.5, 2.0],
            friction: [0.1, 0.6],
            restitution: [0.3, 0.9],
            spawn_half_width: 3.0,
            spawn_clearance: [0.0, 2.0],
            min_gap: 0.1,
            speed: [0.02, 0.12],
            vertical_speed: [-0.02, 0.02],
            angular_speed: [0.0, 0.05],
            floor_half_size: 20.0,
            floor_tiles: 10,
            floor_friction: 0.5,
            floor_restitution: 0.0,
            gravity: DEFAULT_GRAVITY,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.min_objects == 0 || self.min_objects > self.max_objects {
            return bad(format!("object count range [{}, {}] is empty", self.min_objects, self.max_objects));
        }
        let ranges = [
            ("sphere_radius", self.sphere_radius),
            ("cube_half_extent", self.cube_half_extent),
            ("mass", self.mass),
            ("friction", self.friction),
            ("restitution", self.restitution),
            ("spawn_clearance", self.spawn_clearance),
            ("speed", self.speed),
            ("vertical_speed", self.vertical_speed),
            ("angular_speed", self.angular_speed),
        ];
        for (name, [lo, hi]) in ranges {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return bad(format!("{name} range [{lo}, {hi}] is invalid"));
            }
        }
        if self.sphere_radius[0] <= 0.0 || self.cube_half_extent[0] <= 0.0 || self.mass[0] <= 0.0 {
            return bad("sizes and masses must be positive".into());
        }
        if self.restitution[0] < 0.0 || self.restitution[1] > 1.0 || !(0.0..=1.0).contains(&self.floor_restitution) {
            return bad("restitution must lie in [0, 1]".into());
        }
        if self.friction[0] < 0.0 || self.floor_friction < 0.0 {
            return bad("friction must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.sphere_probability) {
            return bad("sphere_probability must lie in [0, 1]".into());
        }
        if self.floor_tiles == 0 || self.floor_half_size <= self.spawn_half_width || self.min_gap < 0.0 {
            return bad("floor must be tiled and larger than the spawn area; min_gap >= 0".into());
        }
        Ok(())
    }

    pub fn floor(&self) -> ObjectSpec {
        ObjectSpec::new(
            Shape::Plane { half_size: self.floor_half_size, tiles: self.floor_tiles },
            0.0,
            self.floor_friction,
            self.floor_restitution,
            true,
        )
    }
}

fn sample<R: Rng>(rng: &mut R, [lo, hi]: Range2) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Uniformly distributed rotation (Shoemake).
pub fn random_rotation<R: Rng>(rng: &mut R) -> Quaternion {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    Quaternion::new(a * (tau * u2).sin(), a * (tau * u2).cos(), b * (tau * u3).sin(), b * (tau * u3).cos())
        .normalized()
        .expect("unit by construction")
}

fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Builds a scene from `seed`. Object 0 is always the static floor.
pub fn generate_scene(seed: u64, config: &SceneConfig) -> Result<(Vec<ObjectSpec>, SimState), SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(config.min_objects..=config.max_objects);

    let mut specs = vec![config.floor()];
    let mut bodies = vec![BodyState::at_rest(Pose::IDENTITY)];
    let mut attempts = 0;
    for _ in 0..count {
        let shape = if rng.gen_bool(config.sphere_probability) {
            Shape::Sphere { radius: sample(&mut rng, config.sphere_radius), subdivision: config.sphere_subdivision }
        } else {
            let h = sample(&mut rng, config.cube_half_extent);
            Shape::Box { half_extents: Vec3::splat(h), subdivision: config.box_subdivision }
        };
        let spec = ObjectSpec::new(
            shape,
            sample(&mut rng, config.mass),
            sample(&mut rng, config.friction),
            sample(&mut rng, config.restitution),
            false,
        );
        let r = shape.bounding_radius();
        let position = loop {
            attempts += 1;
            if attempts > MAX_PLACEMENT_ATTEMPTS {
                return Err(SimError::PlacementFailure { objects: count, attempts: MAX_PLACEMENT_ATTEMPTS });
            }
            let w = config.spawn_half_width;
            let p = Vec3::new(
                rng.gen_range(-w..=w),
                rng.gen_range(-w..=w),
                r + sample(&mut rng, config.spawn_clearance),
            );
            let clear = specs.iter().zip(&bodies).skip(1).all(|(s, b)| {
                (b.pose.position - p).norm() >= s.shape.bounding_radius() + r + config.min_gap
            });
            if clear {
                break p;
            }
        };
        let orientation = random_rotation(&mut rng);
        let heading = (-position.y).atan2(-position.x) + rng.gen_range(-0.5..=0.5);
        let speed = sample(&mut rng, config.speed);
        let velocity = Vec3::new(
            speed * heading.cos(),
            speed * heading.sin(),
            sample(&mut rng, config.vertical_speed),
        );
        let angular_velocity = random_unit(&mut rng) * sample(&mut rng, config.angular_speed);
        specs.push(spec);
        bodies.push(BodyState { pose: Pose::new(position, orientation), velocity, angular_velocity });
    }
    Ok((specs, SimState { bodies, gravity: config.gravity, step: 0 }))
}
