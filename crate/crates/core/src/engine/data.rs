use std::ops::Range;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::EngineError;
use crate::complex::{build_complex, detect_contacts, CombinatorialComplex};
use crate::evaluate::contact_speeds;
use crate::features::{object_centers, FrameHistory, PhysicalParams};
use crate::geometry::Vec3;
use crate::sim::Trajectory;

/// Second differences `x^{t+1} − 2x^t + x^{t−1}` of every node and object
/// center. Rows of static objects are zero.
pub fn compute_targets(
    frames: &[Vec<Vec3>],
    cc: &CombinatorialComplex,
    t: usize,
) -> Result<(Array2<f64>, Array2<f64>), EngineError> {
    if t == 0 || t + 1 >= frames.len() {
        return Err(EngineError::OutOfRange { t, frames: frames.len() });
    }
    let (prev, cur, next) = (&frames[t - 1], &frames[t], &frames[t + 1]);
    let mut nodes = Array2::zeros((cc.node_count(), 3));
    let mut objects = Array2::zeros((cc.cell_count(4), 3));
    let (cp, cc_, cn) = (object_centers(cc, prev), object_centers(cc, cur), object_centers(cc, next));
    for (k, o) in cc.objects().iter().enumerate() {
        if o.is_static {
            continue;
        }
        for i in o.nodes.clone() {
            let a = next[i] - cur[i] * 2.0 + prev[i];
            nodes.row_mut(i).assign(&ndarray::arr1(&a.to_array()));
        }
        let a = cn[k] - cc_[k] * 2.0 + cp[k];
        objects.row_mut(k).assign(&ndarray::arr1(&a.to_array()));
    }
    Ok((nodes, objects))
}

/// One trajectory prepared for training.
#[derive(Debug, Clone)]
pub struct Episode {
    pub seed: u64,
    /// Complex without contacts; contacts are detected per frame.
    pub complex: CombinatorialComplex,
    pub physical: Vec<PhysicalParams>,
    pub frames: Vec<Vec<Vec3>>,
}

impl Episode {
    pub fn from_trajectory(traj: &Trajectory) -> Result<Self, EngineError> {
        Ok(Self {
            seed: traj.seed,
            complex: build_complex(&traj.meshes())?,
            physical: traj.physical(),
            frames: traj.all_node_positions(),
        })
    }

    pub fn node_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.complex.node_count()];
        for o in self.complex.objects().iter().filter(|o| !o.is_static) {
            mask[o.nodes.clone()].fill(true);
        }
        mask
    }

    pub fn object_mask(&self) -> Vec<bool> {
        self.complex.objects().iter().map(|o| !o.is_static).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleId {
    pub episode: usize,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub id: SampleId,
    pub history: FrameHistory,
    pub node_acc: Array2<f64>,
    pub object_acc: Array2<f64>,
    pub node_mask: Vec<bool>,
    pub object_mask: Vec<bool>,
    /// Node range of every object.
    pub objects: Vec<Range<usize>>,
}

/// Random-walk position noise on dynamic nodes: `n^{t−1} ~ N(0, σ²)`,
/// `n^t = n^{t−1} + N(0, σ²)`. Targets are shifted by `n^{t−1} − 2n^t` so the
/// corrected acceleration still lands on the true next frame.
pub fn inject_noise<R: Rng>(sample: &TrainingSample, sigma: f64, rng: &mut R) -> TrainingSample {
    let mut out = sample.clone();
    if sigma == 0.0 {
        return out;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    let draw = |rng: &mut R| Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
    for (k, range) in sample.objects.iter().enumerate() {
        if !sample.object_mask[k] {
            continue;
        }
        let mut shift_sum = Vec3::ZERO;
        for i in range.clone() {
            let n_prev = draw(rng);
            let n_cur = n_prev + draw(rng);
            out.history.previous[i] += n_prev;
            out.history.current[i] += n_cur;
            let shift = n_prev - n_cur * 2.0;
            shift_sum += shift;
            let mut row = out.node_acc.row_mut(i);
            row[0] += shift.x;
            row[1] += shift.y;
            row[2] += shift.z;
        }
        let shift = shift_sum / range.len() as f64;
        let mut row = out.object_acc.row_mut(k);
        row[0] += shift.x;
        row[1] += shift.y;
        row[2] += shift.z;
    }
    out
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub episodes: Vec<Episode>,
    pub samples: Vec<SampleId>,
    /// Frames dropped by the slow-collision mask.
    pub skipped: usize,
}

impl Dataset {
    /// Every frame `t` with both neighbours becomes a sample.
    pub fn new(trajectories: &[Trajectory]) -> Result<Self, EngineError> {
        let episodes = trajectories.iter().map(Episode::from_trajectory).collect::<Result<Vec<_>, _>>()?;
        let samples = episodes
            .iter()
            .enumerate()
            .flat_map(|(e, ep)| (1..ep.frames.len().saturating_sub(1)).map(move |t| SampleId { episode: e, t }))
            .collect();
        Ok(Self { episodes, samples, skipped: 0 })
    }

    /// Drops frames that have contacts whose relative closest-point speeds
    /// all fall below `threshold`. Contact-free frames are kept.
    pub fn mask_slow_collisions(mut self, threshold: f64, d_c: f64) -> Self {
        if threshold <= 0.0 {
            return self;
        }
        let before = self.samples.len();
        let episodes = &self.episodes;
        self.samples.retain(|id| {
            let ep = &episodes[id.episode];
            let cc = detect_contacts(&ep.complex, &ep.frames[id.t], d_c);
            let speeds = contact_speeds(&cc, &ep.frames[id.t - 1], &ep.frames[id.t]);
            speeds.is_empty() || speeds.iter().any(|&s| s >= threshold)
        });
        self.skipped += before - self.samples.len();
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, id: SampleId) -> Result<TrainingSample, EngineError> {
        let ep = &self.episodes[id.episode];
        let (node_acc, object_acc) = compute_targets(&ep.frames, &ep.complex, id.t)?;
        Ok(TrainingSample {
            id,
            history: FrameHistory::from_frames(&ep.frames, id.t)?,
            node_acc,
            object_acc,
            node_mask: ep.node_mask(),
            object_mask: ep.object_mask(),
            objects: ep.complex.objects().iter().map(|o| o.nodes.clone()).collect(),
        })
    }
}
