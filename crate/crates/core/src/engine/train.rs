use std::fmt::Write as _;
use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{inject_noise, loss, normalized_targets, Adam, Dataset, EngineError, LossTerms, LrSchedule, SampleId, TrainingSample};
use crate::complex::detect_contacts;
use crate::features::build_features;
use crate::model::{Gradients, HopNet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Decay horizon; defaults to `steps`.
    pub lr_decay_steps: Option<usize>,
    /// Std of the random-walk input noise (m).
    pub noise_sigma: f64,
    pub lambda_obj: f64,
    pub grad_clip: f64,
    /// Frames per optimizer step. Gradients of a batch are computed in
    /// parallel and summed in sample order.
    pub batch_size: usize,
    pub seed: u64,
    pub log_every: usize,
    /// Checkpoint cadence in optimizer steps; 0 disables.
    pub checkpoint_every: usize,
    /// Frames used to fit the normalizers (evenly strided).
    pub stats_samples: usize,
    /// Frames whose contacts are all slower than this are skipped; 0 keeps all.
    pub slow_collision_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 20_000,
            lr_start: 1e-3,
            lr_end: 1e-5,
            lr_decay_steps: None,
            noise_sigma: 1e-3,
            lambda_obj: 1.0,
            grad_clip: 1.0,
            batch_size: 1,
            seed: 0,
            log_every: 100,
            checkpoint_every: 0,
            stats_samples: 2000,
            slow_collision_threshold: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::InvalidConfig(m.into()));
        if !(self.lr_start >= 0.0 && self.lr_end >= 0.0) || !self.lr_start.is_finite() || !self.lr_end.is_finite() {
            return bad("learning rates must be finite and non-negative");
        }
        if self.lr_start > 0.0 && self.lr_end == 0.0 {
            return bad("lr_end must be positive when lr_start is");
        }
        if !(self.noise_sigma >= 0.0) || !(self.lambda_obj >= 0.0) || !(self.grad_clip > 0.0) {
            return bad("noise_sigma and lambda_obj must be >= 0, grad_clip > 0");
        }
        if self.batch_size == 0 || self.log_every == 0 || self.stats_samples == 0 {
            return bad("batch_size, log_every and stats_samples must be positive");
        }
        if !(self.slow_collision_threshold >= 0.0) {
            return bad("slow_collision_threshold must be >= 0");
        }
        Ok(())
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule { start: self.lr_start, end: self.lr_end, steps: self.lr_decay_steps.unwrap_or(self.steps) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
    /// Seconds since training started.
    pub wall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub skipped_frames: usize,
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    /// Line-delimited `key=value` records; see the format notes in the docs.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# hopnet training log v1\n");
        writeln!(s, "skipped_frames={}", self.skipped_frames).unwrap();
        for r in &self.steps {
            writeln!(s, "step={} loss={:e} lr={:e} wall={:.3}", r.step, r.loss, r.lr, r.wall).unwrap();
        }
        for e in &self.epochs {
            writeln!(s, "epoch={} mean_loss={:e} samples={}", e.epoch, e.mean_loss, e.samples).unwrap();
        }
        s
    }
}

/// Loss and parameter gradients for one (possibly noisy) sample.
pub fn sample_loss_and_grad(
    model: &HopNet,
    dataset: &Dataset,
    sample: &TrainingSample,
    lambda_obj: f64,
) -> Result<(LossTerms, Gradients), EngineError> {
    let ep = &dataset.episodes[sample.id.episode];
    let cc = detect_contacts(&ep.complex, &sample.history.current, model.config.contact_radius);
    let raw = build_features(&sample.history, &cc, &ep.physical, model.config.features())?;
    let bundle = model.normalizers.features.normalize_frozen(&raw);
    let rec = model.record(&bundle, &cc)?;
    let (tn, to) = normalized_targets(sample, &model.normalizers);
    let (terms, gn, go) = loss(
        rec.tape.value(rec.node_acc),
        rec.tape.value(rec.object_acc),
        &tn,
        &to,
        &sample.node_mask,
        &sample.object_mask,
        lambda_obj,
    );
    let grads = rec.tape.backward(&[(rec.node_acc, gn), (rec.object_acc, go)]);
    Ok((terms, grads))
}

fn strided(samples: &[SampleId], max: usize) -> Vec<SampleId> {
    if samples.len() <= max {
        return samples.to_vec();
    }
    (0..max).map(|i| samples[i * samples.len() / max]).collect()
}

fn rows(x: &Array2<f64>, mask: &[bool]) -> Array2<f64> {
    let idx: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    x.select(Axis(0), &idx)
}

/// Accumulates input and target statistics from clean frames. Targets only
/// count rows of dynamic objects.
pub fn fit_normalizers(model: &mut HopNet, dataset: &Dataset, max_samples: usize) -> Result<(), EngineError> {
    let cfg = model.config.features();
    for id in strided(&dataset.samples, max_samples) {
        let sample = dataset.sample(id)?;
        let ep = &dataset.episodes[id.episode];
        let cc = detect_contacts(&ep.complex, &sample.history.current, model.config.contact_radius);
        let raw = build_features(&sample.history, &cc, &ep.physical, cfg)?;
        let n = &mut model.normalizers;
        n.features.normalize(&raw, true);
        n.node_target.update(&rows(&sample.node_acc, &sample.node_mask));
        n.object_target.update(&rows(&sample.object_acc, &sample.object_mask));
    }
    Ok(())
}

/// Mean noise-free loss over every sample of `dataset`.
pub fn evaluate_loss(model: &HopNet, dataset: &Dataset, lambda_obj: f64) -> Result<f64, EngineError> {
    if dataset.is_empty() {
        return Err(EngineError::EmptyDataset);
    }
    let losses = dataset
        .samples
        .par_iter()
        .map(|&id| {
            let sample = dataset.sample(id)?;
            Ok(sample_loss_and_grad(model, dataset, &sample, lambda_obj)?.0.total)
        })
        .collect::<Result<Vec<f64>, EngineError>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Seeded-shuffle training loop with Adam, gradient clipping and
/// exponential learning-rate decay.
pub struct Trainer<'d> {
    model: HopNet,
    dataset: &'d Dataset,
    config: TrainConfig,
    adam: Adam,
    schedule: LrSchedule,
    shuffle: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    epoch: usize,
    epoch_loss: f64,
    epoch_samples: usize,
    step: usize,
    draws: u64,
    started: Instant,
    log: TrainLog,
}

impl<'d> Trainer<'d> {
    /// Fits the normalizers first unless the model already carries statistics.
    pub fn new(mut model: HopNet, dataset: &'d Dataset, config: TrainConfig) -> Result<Self, EngineError> {
        config.validate()?;
        if dataset.is_empty() {
            return Err(EngineError::EmptyDataset);
        }
        if model.normalizers.node_target.count == 0.0 {
            fit_normalizers(&mut model, dataset, config.stats_samples)?;
        }
        let mut shuffle = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut shuffle);
        Ok(Self {
            adam: Adam::new(&model.params),
            schedule: config.schedule(),
            model,
            dataset,
            config,
            shuffle,
            order,
            cursor: 0,
            epoch: 0,
            epoch_loss: 0.0,
            epoch_samples: 0,
            step: 0,
            draws: 0,
            started: Instant::now(),
            log: TrainLog { skipped_frames: dataset.skipped, ..TrainLog::default() },
        })
    }

    pub fn model(&self) -> &HopNet {
        &self.model
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    fn next_sample(&mut self) -> SampleId {
        if self.cursor == self.order.len() {
            self.close_epoch();
            self.order.shuffle(&mut self.shuffle);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.dataset.samples[self.order[self.cursor - 1]]
    }

    fn close_epoch(&mut self) {
        if self.epoch_samples > 0 {
            self.log.epochs.push(EpochRecord {
                epoch: self.epoch,
                mean_loss: self.epoch_loss / self.epoch_samples as f64,
                samples: self.epoch_samples,
            });
        }
        self.epoch += 1;
        self.epoch_loss = 0.0;
        self.epoch_samples = 0;
    }

    /// One optimizer step; returns the batch-mean loss before the update.
    pub fn step(&mut self) -> Result<f64, EngineError> {
        let jobs: Vec<(SampleId, u64)> = (0..self.config.batch_size)
            .map(|_| {
                self.draws += 1;
                (self.next_sample(), self.draws)
            })
            .collect();
        let (model, dataset, cfg) = (&self.model, self.dataset, &self.config);
        let results = jobs
            .par_iter()
            .map(|&(id, draw)| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(draw);
                let sample = inject_noise(&dataset.sample(id)?, cfg.noise_sigma, &mut rng);
                sample_loss_and_grad(model, dataset, &sample, cfg.lambda_obj)
            })
            .collect::<Vec<_>>();

        let mut total = Gradients::zeros_like(&self.model.params);
        let mut loss_sum = 0.0;
        for (&(id, _), r) in jobs.iter().zip(results) {
            let (terms, grads) = r?;
            if !terms.total.is_finite() || !grads.is_finite() {
                return Err(EngineError::NonFiniteLoss { step: self.step + 1, episode: id.episode, t: id.t });
            }
            loss_sum += terms.total;
            total.add_assign(&grads);
        }
        let n = jobs.len() as f64;
        total.scale(1.0 / n);
        super::clip_gradients(&mut total, self.config.grad_clip);
        let lr = self.schedule.at(self.step);
        self.adam.update(&mut self.model.params, &total, lr);
        self.step += 1;

        let mean = loss_sum / n;
        self.epoch_loss += loss_sum;
        self.epoch_samples += jobs.len();
        if self.step % self.config.log_every == 0 || self.step == 1 || self.step == self.config.steps {
            self.log.steps.push(StepRecord { step: self.step, loss: mean, lr, wall: self.started.elapsed().as_secs_f64() });
        }
        Ok(mean)
    }

    /// Runs the remaining configured steps, calling `checkpoint` at the
    /// configured cadence and once at the end.
    pub fn run(
        &mut self,
        mut checkpoint: impl FnMut(usize, &HopNet) -> Result<(), EngineError>,
    ) -> Result<(), EngineError> {
        while self.step < self.config.steps {
            self.step()?;
            if self.config.checkpoint_every > 0 && self.step % self.config.checkpoint_every == 0 && self.step < self.config.steps {
                checkpoint(self.step, &self.model)?;
            }
        }
        checkpoint(self.step, &self.model)
    }

    /// Closes the running epoch in the log and returns model and log.
    pub fn finish(mut self) -> (HopNet, TrainLog) {
        if self.epoch_samples > 0 {
            self.close_epoch();
        }
        (self.model, self.log)
    }
}

pub fn train(model: HopNet, dataset: &Dataset, config: &TrainConfig) -> Result<(HopNet, TrainLog), EngineError> {
    let mut trainer = Trainer::new(model, dataset, config.clone())?;
    trainer.run(|_, _| Ok(()))?;
    Ok(trainer.finish())
}
