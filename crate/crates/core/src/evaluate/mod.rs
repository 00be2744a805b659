//! Rollout metrics, collision-speed statistics and counterfactual edits.

mod counterfactual;
mod histogram;
mod metrics;

use thiserror::Error;

pub use counterfactual::{apply_counterfactual, Edit};
pub use histogram::{collision_speed_histogram, contact_speeds, Histogram, HISTOGRAM_BIN_WIDTH};
pub use metrics::{
    evaluate_trajectories, orientation_error_deg, rmse_ori, rmse_pos, HorizonReport, MetricMode, MetricReport,
    ObjectError, DEFAULT_HORIZONS,
};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {what} has {left} vs {right}")]
    LengthMismatch { what: &'static str, left: usize, right: usize },
    #[error("unknown object {0}")]
    UnknownObject(usize),
    #[error("object {0} is static and cannot be edited")]
    EditOnStatic(usize),
    #[error("no dynamic objects to evaluate")]
    EmptyDynamicSet,
    #[error("invalid edit: {0}")]
    InvalidEdit(String),
}
