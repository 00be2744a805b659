use std::path::Path;

use hopnet::engine::TrainConfig;
use hopnet::evaluate::{MetricMode, DEFAULT_HORIZONS};
use hopnet::model::ModelConfig;
use hopnet::sim::{PhysicsConfig, SceneConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Trajectory `i` of the training split uses seed `seed + i`; test
    /// trajectories continue after the training ones.
    pub seed: u64,
    pub train_count: usize,
    pub test_count: usize,
    pub steps: usize,
    pub scene: SceneConfig,
    pub physics: PhysicsConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            train_count: 300,
            test_count: 30,
            steps: 64,
            scene: SceneConfig::default(),
            physics: PhysicsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub horizons: Vec<usize>,
    pub metric_mode: MetricMode,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { horizons: DEFAULT_HORIZONS.to_vec(), metric_mode: MetricMode::Paper }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub training: TrainConfig,
    pub evaluation: EvaluationConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::parse(&crate::read_text(path)?)
    }

    /// Defaults when no path is given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.dataset.scene.validate().or_else(|e| bad(e.to_string()))?;
        let p = &self.dataset.physics;
        if p.iterations == 0 || !(0.0..=1.0).contains(&p.baumgarte) || !(p.speed_cap > 0.0) {
            return bad("physics: iterations > 0, baumgarte in [0, 1], speed_cap > 0 required".into());
        }
        self.model.validate().or_else(bad)?;
        self.training.validate().or_else(|e| bad(e.to_string()))?;
        if self.evaluation.horizons.is_empty() || self.evaluation.horizons.contains(&0) {
            return bad("evaluation.horizons must be a non-empty list of positive steps".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }
}
