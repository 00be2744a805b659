//! Learned rigid-body dynamics on combinatorial complexes.
//!
//! Scenes of triangle-meshed rigid objects are lifted into a five-rank
//! combinatorial complex (nodes, edges, faces, collision contacts, objects).
//! A sequential message-passing network predicts per-node and per-object
//! accelerations, which are integrated and projected back onto rigid poses by
//! shape matching. A deterministic impulse simulator provides ground truth.

pub mod geometry;
pub mod complex;
pub mod features;
pub mod binio;
pub mod model;
pub mod sim;
pub mod engine;
pub mod evaluate;
