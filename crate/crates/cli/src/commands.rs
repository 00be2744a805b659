use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hopnet::engine::{rollout as run_rollout, Dataset, RolloutInit, TrainLog, Trainer};
use hopnet::evaluate::{apply_counterfactual, evaluate_trajectories, Edit, MetricMode, MetricReport};
use hopnet::model::HopNet;
use hopnet::sim::{simulate_trajectory, Trajectory};
use rayon::prelude::*;

use crate::config::{Config, DatasetConfig};
use crate::manifest::{sha256_hex, Manifest, ManifestEntry};
use crate::{write_atomic, CliError};

pub const TRAJECTORY_EXT: &str = "traj";

fn load_trajectory(path: &Path) -> Result<Trajectory, CliError> {
    Trajectory::load(path).map_err(|e| CliError::Format(path.display().to_string(), e))
}

fn load_checkpoint(path: &Path) -> Result<HopNet, CliError> {
    HopNet::load(path).map_err(|e| CliError::Format(path.display().to_string(), e))
}

/// Simulates both splits in parallel and writes them with a manifest.
pub fn generate(config: &DatasetConfig, out: &Path) -> Result<Manifest, CliError> {
    let jobs: Vec<(&str, usize, u64)> = (0..config.train_count)
        .map(|i| ("train", i, config.seed + i as u64))
        .chain((0..config.test_count).map(|i| ("test", i, config.seed + (config.train_count + i) as u64)))
        .collect();
    let entries = jobs
        .par_iter()
        .map(|&(split, i, seed)| {
            let traj = simulate_trajectory(seed, &config.scene, &config.physics, config.steps)?;
            let bytes = traj.to_bytes();
            let file = format!("{split}/{split}_{i:05}.{TRAJECTORY_EXT}");
            write_atomic(&out.join(&file), &bytes)?;
            Ok(ManifestEntry { split: split.into(), file, seed, frames: traj.frame_count(), sha256: sha256_hex(&bytes) })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let manifest = Manifest::new(config.clone(), entries);
    write_atomic(&Manifest::path(out), manifest.to_toml().as_bytes())?;
    Ok(manifest)
}

pub struct TrainOutcome {
    pub model: HopNet,
    pub log: TrainLog,
}

/// Trains on the verified training split; the checkpoint at `out` is
/// rewritten at the configured cadence and at the end.
pub fn train(config: &Config, dataset_dir: &Path, out: &Path, log_path: &Path) -> Result<TrainOutcome, CliError> {
    let manifest = Manifest::load(dataset_dir)?;
    let trajectories = manifest.load_split(dataset_dir, "train")?;
    if trajectories.is_empty() {
        return Err(CliError::Argument(format!("{} has no training trajectories", dataset_dir.display())));
    }
    let dataset = Dataset::new(&trajectories)?
        .mask_slow_collisions(config.training.slow_collision_threshold, config.model.contact_radius);
    eprintln!(
        "training on {} frames from {} trajectories ({} skipped by the slow-collision mask)",
        dataset.len(),
        trajectories.len(),
        dataset.skipped
    );
    let model = HopNet::new(config.model, config.training.seed);
    let mut trainer = Trainer::new(model, &dataset, config.training.clone())?;
    let mut save_error = None;
    trainer.run(|_, model| {
        let mut bytes = Vec::new();
        model.write_checkpoint(&mut bytes).map_err(hopnet::engine::EngineError::Format)?;
        if let Err(e) = write_atomic(out, &bytes) {
            save_error = Some(e);
        }
        Ok(())
    })?;
    if let Some(e) = save_error {
        return Err(e);
    }
    let (model, log) = trainer.finish();
    write_atomic(log_path, log.to_text().as_bytes())?;
    Ok(TrainOutcome { model, log })
}

pub fn apply_edits(init: &RolloutInit, edits: &[Edit]) -> Result<RolloutInit, CliError> {
    let mut out = init.clone();
    for e in edits {
        out = apply_counterfactual(&out, e)?;
    }
    Ok(out)
}

/// `frame,object,x,y,z,qw,qx,qy,qz` rows for external plotting.
pub fn pose_csv(traj: &Trajectory, ids: &[usize]) -> String {
    let mut s = String::from("frame,object,x,y,z,qw,qx,qy,qz\n");
    for (t, frame) in traj.frames.iter().enumerate() {
        for (pose, id) in frame.iter().zip(ids) {
            let (p, q) = (pose.position, pose.orientation);
            writeln!(s, "{t},{id},{},{},{},{},{},{},{}", p.x, p.y, p.z, q.w, q.x, q.y, q.z).unwrap();
        }
    }
    s
}

/// Rolls one trajectory out from its first two frames. `horizon` defaults
/// to the length of the input.
pub fn rollout_one(model: &HopNet, truth: &Trajectory, horizon: Option<usize>, edits: &[Edit]) -> Result<(Trajectory, Vec<usize>), CliError> {
    let init = apply_edits(&RolloutInit::from_trajectory(truth)?, edits)?;
    let horizon = horizon.unwrap_or(truth.frame_count().saturating_sub(2).max(1));
    let result = run_rollout(model, &init, horizon)?;
    Ok((result.to_trajectory(&init), init.ids))
}

pub fn export_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".poses.csv");
    PathBuf::from(s)
}

fn write_rollout(out: &Path, export: &Path, pred: &Trajectory, ids: &[usize]) -> Result<(), CliError> {
    write_atomic(out, &pred.to_bytes())?;
    write_atomic(export, pose_csv(pred, ids).as_bytes())
}

/// Rolls out a single trajectory file, or every trajectory of `split` when
/// `input` is a dataset directory (then `out` is a directory too).
pub fn rollout(
    checkpoint: &Path,
    input: &Path,
    split: &str,
    horizon: Option<usize>,
    edits: &[Edit],
    out: &Path,
    export: Option<&Path>,
) -> Result<usize, CliError> {
    let model = load_checkpoint(checkpoint)?;
    if input.is_dir() {
        let manifest = Manifest::load(input)?;
        let entries: Vec<&ManifestEntry> = manifest.entries(split).collect();
        entries
            .par_iter()
            .map(|e| {
                let truth = Manifest::read_entry(input, e)?;
                let (pred, ids) = rollout_one(&model, &truth, horizon, edits)?;
                let name = Path::new(&e.file).file_name().expect("manifest entries name files");
                let target = out.join(name);
                write_rollout(&target, &export_path(&target), &pred, &ids)
            })
            .collect::<Result<Vec<()>, CliError>>()?;
        return Ok(entries.len());
    }
    let truth = load_trajectory(input)?;
    let (pred, ids) = rollout_one(&model, &truth, horizon, edits)?;
    write_rollout(out, &export.map_or_else(|| export_path(out), Path::to_path_buf), &pred, &ids)?;
    Ok(1)
}

/// Compares predictions with ground truth. Directories are paired by file
/// name through the truth manifest's `split`.
pub fn eval(
    pred: &Path,
    truth: &Path,
    split: &str,
    horizons: &[usize],
    mode: MetricMode,
    checkpoint: &str,
) -> Result<MetricReport, CliError> {
    let pairs: Vec<(Trajectory, Trajectory)> = if truth.is_dir() {
        let manifest = Manifest::load(truth)?;
        manifest
            .entries(split)
            .map(|e| {
                let name = Path::new(&e.file).file_name().expect("manifest entries name files");
                Ok((load_trajectory(&pred.join(name))?, Manifest::read_entry(truth, e)?))
            })
            .collect::<Result<_, CliError>>()?
    } else {
        vec![(load_trajectory(pred)?, load_trajectory(truth)?)]
    };
    if pairs.is_empty() {
        return Err(CliError::Argument(format!("no '{split}' trajectories under {}", truth.display())));
    }
    let refs: Vec<(&Trajectory, &Trajectory)> = pairs.iter().map(|(p, t)| (p, t)).collect();
    Ok(evaluate_trajectories(&refs, horizons, mode, &truth.display().to_string(), checkpoint)?)
}

pub fn report_toml(report: &MetricReport) -> String {
    toml::to_string(report).expect("metric report always serializes")
}

pub fn clamp_warnings(report: &MetricReport) -> Vec<String> {
    report
        .clamped()
        .map(|h| {
            format!(
                "warning: HorizonClamped: requested horizon {} exceeds the available {} steps; reporting at {}",
                h.requested, report.available_horizon, h.horizon
            )
        })
        .collect()
}
