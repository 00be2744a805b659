//! Recorded trajectories and their binary file format.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic              8 bytes "HOPNETTR"
//! version            u32 = TRAJECTORY_VERSION
//! seed               u64
//! generator_version  u32
//! object_count       u32, then per object:
//!   kind u8 (0 sphere, 1 box, 2 plane)
//!   sphere: radius f64, subdivision u32
//!   box:    half extents 3×f64, subdivision u32
//!   plane:  half size f64, tiles u32
//!   mass f64, friction f64, restitution f64, is_static u8
//!   node_count u32, node_count × 3 f64
//!   face_count u32, face_count × 3 u32
//! frame_count        u32, then per frame and per object:
//!   position 3×f64, orientation (w, x, y, z) 4×f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::body::{ObjectSpec, Pose, Shape, SimError, SimState};
use super::mesh::TriMesh;
use super::scene::{generate_scene, SceneConfig};
use super::step::{step, PhysicsConfig};
use crate::binio::{BinReader, BinWriter, FormatError};
use crate::complex::MeshTopology;
use crate::features::PhysicalParams;
use crate::geometry::{Quaternion, Vec3};

pub const TRAJECTORY_MAGIC: &[u8; 8] = b"HOPNETTR";
pub const TRAJECTORY_VERSION: u32 = 1;
pub const GENERATOR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub generator_version: u32,
    pub objects: Vec<ObjectSpec>,
    /// `frames[t][k]`: pose of object `k` at frame `t`; unit time step.
    pub frames: Vec<Vec<Pose>>,
}

impl Trajectory {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn node_count(&self) -> usize {
        self.objects.iter().map(|o| o.mesh.nodes.len()).sum()
    }

    pub fn dynamic_objects(&self) -> Vec<usize> {
        (0..self.objects.len()).filter(|&k| !self.objects[k].is_static).collect()
    }

    pub fn meshes(&self) -> Vec<MeshTopology> {
        self.objects.iter().map(|o| o.mesh.topology(o.is_static)).collect()
    }

    pub fn physical(&self) -> Vec<PhysicalParams> {
        self.objects.iter().map(|o| o.physical()).collect()
    }

    /// World positions of every mesh node, objects concatenated in order.
    pub fn node_positions(&self, t: usize) -> Vec<Vec3> {
        pose_nodes(&self.objects, &self.frames[t])
    }

    pub fn all_node_positions(&self) -> Vec<Vec<Vec3>> {
        (0..self.frames.len()).map(|t| self.node_positions(t)).collect()
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        if self.frames.iter().any(|f| f.len() != self.objects.len()) {
            return Err(FormatError::Corrupt("frame object count mismatch".into()));
        }
        if self.frames.iter().flatten().any(|p| !p.is_finite()) {
            return Err(FormatError::Corrupt("non-finite pose".into()));
        }
        for o in &self.objects {
            let n = o.mesh.nodes.len();
            if o.mesh.faces.iter().flatten().any(|&i| i >= n) {
                return Err(FormatError::Corrupt("face index out of range".into()));
            }
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, out: W) -> Result<(), FormatError> {
        let mut w = BinWriter::new(out);
        w.bytes(TRAJECTORY_MAGIC)?;
        w.u32(TRAJECTORY_VERSION)?;
        w.u64(self.seed)?;
        w.u32(self.generator_version)?;
        w.u32(self.objects.len() as u32)?;
        for o in &self.objects {
            match o.shape {
                Shape::Sphere { radius, subdivision } => {
                    w.u8(0)?;
                    w.f64(radius)?;
                    w.u32(subdivision)?;
                }
                Shape::Box { half_extents, subdivision } => {
                    w.u8(1)?;
                    w.f64s(&half_extents.to_array())?;
                    w.u32(subdivision)?;
                }
                Shape::Plane { half_size, tiles } => {
                    w.u8(2)?;
                    w.f64(half_size)?;
                    w.u32(tiles)?;
                }
            }
            w.f64(o.mass)?;
            w.f64(o.friction)?;
            w.f64(o.restitution)?;
            w.u8(o.is_static as u8)?;
            w.u32(o.mesh.nodes.len() as u32)?;
            for p in &o.mesh.nodes {
                w.f64s(&p.to_array())?;
            }
            w.u32(o.mesh.faces.len() as u32)?;
            for f in &o.mesh.faces {
                for &i in f {
                    w.u32(i as u32)?;
                }
            }
        }
        w.u32(self.frames.len() as u32)?;
        for frame in &self.frames {
            for p in frame {
                w.f64s(&p.position.to_array())?;
                let q = p.orientation;
                w.f64s(&[q.w, q.x, q.y, q.z])?;
            }
        }
        w.into_inner().flush()?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self, FormatError> {
        let mut r = BinReader::new(input);
        r.header(TRAJECTORY_MAGIC, "trajectory", TRAJECTORY_VERSION)?;
        let seed = r.u64()?;
        let generator_version = r.u32()?;
        let count = r.u32()? as usize;
        let mut objects = Vec::with_capacity(count.min(1024));
        let vec3 = |r: &mut BinReader<R>| -> Result<Vec3, FormatError> { Ok(Vec3::new(r.f64()?, r.f64()?, r.f64()?)) };
        for _ in 0..count {
            let shape = match r.u8()? {
                0 => Shape::Sphere { radius: r.f64()?, subdivision: r.u32()? },
                1 => Shape::Box { half_extents: vec3(&mut r)?, subdivision: r.u32()? },
                2 => Shape::Plane { half_size: r.f64()?, tiles: r.u32()? },
                k => return Err(FormatError::Corrupt(format!("unknown shape kind {k}"))),
            };
            let mass = r.f64()?;
            let friction = r.f64()?;
            let restitution = r.f64()?;
            let is_static = match r.u8()? {
                0 => false,
                1 => true,
                b => return Err(FormatError::Corrupt(format!("bad static flag {b}"))),
            };
            let n = r.u32()? as usize;
            let nodes = (0..n).map(|_| vec3(&mut r)).collect::<Result<Vec<_>, _>>()?;
            let f = r.u32()? as usize;
            let faces = (0..f)
                .map(|_| Ok([r.u32()? as usize, r.u32()? as usize, r.u32()? as usize]))
                .collect::<Result<Vec<_>, FormatError>>()?;
            objects.push(ObjectSpec { shape, mass, friction, restitution, is_static, mesh: TriMesh { nodes, faces } });
        }
        let frame_count = r.u32()? as usize;
        let mut frames = Vec::with_capacity(frame_count.min(1 << 16));
        for _ in 0..frame_count {
            let frame = (0..count)
                .map(|_| {
                    let position = vec3(&mut r)?;
                    let q = Quaternion::new(r.f64()?, r.f64()?, r.f64()?, r.f64()?);
                    Ok(Pose::new(position, q))
                })
                .collect::<Result<Vec<_>, FormatError>>()?;
            frames.push(frame);
        }
        r.finish()?;
        let t = Trajectory { seed, generator_version, objects, frames };
        t.validate()?;
        Ok(t)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        self.write(&mut b).expect("writing to memory cannot fail");
        b
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

pub fn pose_nodes(objects: &[ObjectSpec], poses: &[Pose]) -> Vec<Vec3> {
    objects
        .iter()
        .zip(poses)
        .flat_map(|(o, p)| o.mesh.nodes.iter().map(move |&x| p.apply(x)))
        .collect()
}

/// The frame one step before `state`, consistent with its velocities.
pub fn history_frame(state: &SimState) -> Vec<Pose> {
    state
        .bodies
        .iter()
        .map(|b| {
            let back = Quaternion::from_rotation_vector(b.angular_velocity * -1.0);
            Pose::new(
                b.pose.position - b.velocity,
                (back * b.pose.orientation).normalized().expect("unit quaternion"),
            )
        })
        .collect()
}

/// Simulates `steps` steps from an explicit initial state. The result has
/// `steps + 2` frames: the history frame, the initial frame, then one per step.
pub fn simulate(
    seed: u64,
    objects: Vec<ObjectSpec>,
    initial: SimState,
    physics: &PhysicsConfig,
    steps: usize,
) -> Result<Trajectory, SimError> {
    for o in &objects {
        o.validate()?;
    }
    let mut frames = Vec::with_capacity(steps + 2);
    frames.push(history_frame(&initial));
    frames.push(initial.poses());
    let mut state = initial;
    for _ in 0..steps {
        state = step(&state, &objects, physics)?;
        frames.push(state.poses());
    }
    Ok(Trajectory { seed, generator_version: GENERATOR_VERSION, objects, frames })
}

pub fn simulate_trajectory(
    seed: u64,
    scene: &SceneConfig,
    physics: &PhysicsConfig,
    steps: usize,
) -> Result<Trajectory, SimError> {
    let (objects, state) = generate_scene(seed, scene)?;
    simulate(seed, objects, state, physics, steps)
}
