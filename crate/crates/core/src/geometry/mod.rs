//! Exact 3D primitives: vectors, quaternions, triangles, broadphase and
//! shape matching. Everything here is a pure function of its inputs.

mod broadphase;
mod mat3;
mod quat;
mod shape_match;
mod triangle;
mod vec3;

pub use broadphase::{aabb_pairs, Aabb};
pub use mat3::{Mat3, JACOBI_MAX_SWEEPS, JACOBI_TOLERANCE};
pub use quat::{hamilton_product, quat_from_matrix, quat_inverse, Quaternion};
pub use shape_match::{shape_match, RigidFit};
pub use triangle::{
    barycentric, closest_point_on_triangle, closest_points, closest_points_segments,
    triangle_normal, ClosestPoints, Triangle, DEGENERATE_TOLERANCE,
};
pub use vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum GeometryError {
    #[error("degenerate triangle (cross-product norm below tolerance)")]
    DegenerateTriangle,
    #[error("degenerate point configuration for shape matching")]
    DegenerateConfiguration,
    #[error("quaternion norm too small to invert")]
    ZeroQuaternion,
}
