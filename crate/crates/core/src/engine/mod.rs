//! Training (targets, loss, noise, optimizer) and autoregressive rollout.

mod data;
mod loss;
mod optim;
mod rollout;
mod train;

use thiserror::Error;

use crate::binio::FormatError;
use crate::complex::ComplexError;
use crate::features::FeatureError;
use crate::geometry::GeometryError;
use crate::model::ModelError;

pub use data::{compute_targets, inject_noise, Dataset, Episode, SampleId, TrainingSample};
pub use loss::{loss, normalized_targets, LossTerms};
pub use optim::{clip_gradients, Adam, LrSchedule};
pub use rollout::{rollout, Predictor, RolloutInit, RolloutResult};
pub use train::{
    evaluate_loss, fit_normalizers, sample_loss_and_grad, train, EpochRecord, StepRecord, TrainConfig, TrainLog,
    Trainer,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("frame {t} needs neighbours t-1 and t+1 but the trajectory has {frames} frames")]
    OutOfRange { t: usize, frames: usize },
    #[error("non-finite loss at step {step} on trajectory {episode} frame {t}")]
    NonFiniteLoss { step: usize, episode: usize, t: usize },
    #[error("dataset has no training frames")]
    EmptyDataset,
    #[error("scene has no dynamic objects")]
    EmptyDynamicSet,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Format(#[from] FormatError),
}
