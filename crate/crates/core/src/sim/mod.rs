//! Deterministic impulse-based rigid-body simulator and scene generator that
//! produce the ground-truth trajectories.

mod body;
mod mesh;
mod scene;
mod step;
mod trajectory;

pub use body::{
    inertia_world, inverse_inertia_world, mechanical_energy, BodyState, ObjectSpec, Pose, Shape, SimError, SimState,
};
pub use mesh::{floor_grid, icosphere, subdivided_box, TriMesh};
pub use scene::{generate_scene, random_rotation, Range2, SceneConfig, MAX_PLACEMENT_ATTEMPTS};
pub use step::{body_contacts, step, BodyContact, PhysicsConfig, DEFAULT_GRAVITY};
pub use trajectory::{
    history_frame, pose_nodes, simulate, simulate_trajectory, Trajectory, GENERATOR_VERSION, TRAJECTORY_MAGIC,
    TRAJECTORY_VERSION,
};
