use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hopnet::evaluate::{Edit, MetricMode};
use hopnet::geometry::Vec3;

use crate::commands;
use crate::config::Config;
use crate::{write_atomic, CliError};

#[derive(Debug, Parser)]
#[command(name = "hopnet", version, about = "Learned rigid-body dynamics on combinatorial complexes")]
pub struct Cli {
    /// Worker threads for parallel work [default: all cores]
    #[arg(long, global = true, value_name = "N", env = "HOPNET_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset of ground-truth trajectories
    Generate(GenerateArgs),
    /// Train a model on the training split of a dataset
    Train(TrainArgs),
    /// Roll a trained model out from the first two frames of trajectories
    Rollout(RolloutArgs),
    /// Compare predicted and ground-truth trajectories
    Eval(EvalArgs),
    /// Print or check configuration files
    Config(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Configuration file (TOML); defaults apply when omitted
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override dataset.seed
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Output dataset directory
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Configuration file (TOML); defaults apply when omitted
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Dataset directory written by `generate`
    #[arg(long, value_name = "PATH")]
    pub dataset: PathBuf,
    /// Override training.seed (initialization, shuffling and noise)
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Checkpoint file to write
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Training log file [default: <out>.log]
    #[arg(long, value_name = "PATH")]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    /// Checkpoint file written by `train`
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// Trajectory file, or a dataset directory to roll out a whole split
    #[arg(long, value_name = "PATH")]
    pub trajectory: PathBuf,
    /// Split rolled out when --trajectory is a directory
    #[arg(long, value_name = "NAME", default_value = "test")]
    pub split: String,
    /// Steps to predict [default: length of the input trajectory]
    #[arg(long, value_name = "N")]
    pub horizon: Option<usize>,
    /// Remove a dynamic object before rolling out (repeatable)
    #[arg(long, value_name = "ID")]
    pub remove_object: Vec<usize>,
    /// Set the mass of an object in kg (repeatable)
    #[arg(long, value_name = "ID:V", value_parser = parse_mass)]
    pub set_mass: Vec<(usize, f64)>,
    /// Set the linear velocity of an object in m/step (repeatable)
    #[arg(long, value_name = "ID:X,Y,Z", value_parser = parse_velocity, allow_hyphen_values = true)]
    pub set_velocity: Vec<(usize, Vec3)>,
    /// Predicted trajectory file, or directory for a split
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Per-frame pose CSV [default: <out>.poses.csv]
    #[arg(long, value_name = "PATH")]
    pub export: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Configuration file supplying default horizons and metric mode
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Predicted trajectory file or directory
    #[arg(long, value_name = "PATH")]
    pub pred: PathBuf,
    /// Ground-truth trajectory file or dataset directory
    #[arg(long, value_name = "PATH")]
    pub truth: PathBuf,
    /// Split evaluated when --truth is a directory
    #[arg(long, value_name = "NAME", default_value = "test")]
    pub split: String,
    /// Rollout step to evaluate (repeatable) [default: evaluation.horizons]
    #[arg(long, value_name = "N")]
    pub horizon: Vec<usize>,
    /// Orientation metric: sqrt of mean degrees (paper) or of mean squared degrees
    #[arg(long, value_name = "MODE")]
    pub metric_mode: Option<MetricMode>,
    /// Checkpoint name recorded in the report
    #[arg(long, value_name = "NAME", default_value = "")]
    pub checkpoint: String,
    /// Report file (TOML) [default: stdout]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Print the full default configuration
    #[arg(long, conflicts_with = "config")]
    pub dump_defaults: bool,
    /// Validate a configuration file and print it with defaults filled in
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

fn parse_mass(s: &str) -> Result<(usize, f64), String> {
    let (id, v) = s.split_once(':').ok_or("expected ID:V")?;
    Ok((id.trim().parse().map_err(|e| format!("bad id: {e}"))?, v.trim().parse().map_err(|e| format!("bad mass: {e}"))?))
}

fn parse_velocity(s: &str) -> Result<(usize, Vec3), String> {
    let (id, v) = s.split_once(':').ok_or("expected ID:X,Y,Z")?;
    let parts: Vec<f64> = v.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| format!("bad velocity: {e}"))?;
    if parts.len() != 3 {
        return Err("velocity needs three components".into());
    }
    Ok((id.trim().parse().map_err(|e| format!("bad id: {e}"))?, Vec3::new(parts[0], parts[1], parts[2])))
}

impl RolloutArgs {
    /// Mass and velocity edits first, removals last.
    pub fn edits(&self) -> Vec<Edit> {
        self.set_mass
            .iter()
            .map(|&(id, m)| Edit::SetMass(id, m))
            .chain(self.set_velocity.iter().map(|&(id, v)| Edit::SetVelocity(id, v)))
            .chain(self.remove_object.iter().map(|&id| Edit::RemoveObject(id)))
            .collect()
    }
}

fn default_log(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".log");
    PathBuf::from(s)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Argument("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Argument(format!("cannot size the thread pool: {e}")))?;
    }
    match cli.command {
        Command::Generate(a) => {
            let mut config = Config::load_or_default(a.config.as_deref())?;
            if let Some(seed) = a.seed {
                config.dataset.seed = seed;
            }
            let manifest = commands::generate(&config.dataset, &a.out)?;
            eprintln!("wrote {} trajectories to {}", manifest.trajectories.len(), a.out.display());
        }
        Command::Train(a) => {
            let mut config = Config::load_or_default(a.config.as_deref())?;
            if let Some(seed) = a.seed {
                config.training.seed = seed;
            }
            let log = a.log.unwrap_or_else(|| default_log(&a.out));
            let outcome = commands::train(&config, &a.dataset, &a.out, &log)?;
            if let Some(last) = outcome.log.steps.last() {
                eprintln!("step {} loss {:e}", last.step, last.loss);
            }
            eprintln!("wrote {} and {}", a.out.display(), log.display());
        }
        Command::Rollout(ref a) => {
            let n = commands::rollout(&a.checkpoint, &a.trajectory, &a.split, a.horizon, &a.edits(), &a.out, a.export.as_deref())?;
            eprintln!("wrote {n} rollout(s) to {}", a.out.display());
        }
        Command::Eval(a) => {
            let config = Config::load_or_default(a.config.as_deref())?;
            let horizons = if a.horizon.is_empty() { config.evaluation.horizons.clone() } else { a.horizon.clone() };
            if horizons.contains(&0) {
                return Err(CliError::Argument("--horizon must be positive".into()));
            }
            let mode = a.metric_mode.unwrap_or(config.evaluation.metric_mode);
            let report = commands::eval(&a.pred, &a.truth, &a.split, &horizons, mode, &a.checkpoint)?;
            for w in commands::clamp_warnings(&report) {
                eprintln!("{w}");
            }
            let text = commands::report_toml(&report);
            match a.out {
                Some(path) => write_atomic(&path, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
        Command::Config(a) => {
            let config = match a.config {
                Some(path) => Config::load(&path)?,
                None if a.dump_defaults => Config::default(),
                None => return Err(CliError::Argument("pass --dump-defaults or --config PATH".into())),
            };
            print!("{}", config.to_toml());
        }
    }
    Ok(())
}
