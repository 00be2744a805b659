use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::geometry::{Quaternion, Vec3};
use crate::sim::Trajectory;

pub const DEFAULT_HORIZONS: [usize; 4] = [25, 50, 75, 100];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricMode {
    /// `sqrt(mean(angle_deg))`, literally as the metric is printed.
    #[default]
    Paper,
    /// `sqrt(mean(angle_deg²))`.
    Squared,
}

impl std::str::FromStr for MetricMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper" => Ok(Self::Paper),
            "squared" => Ok(Self::Squared),
            _ => Err(format!("unknown metric mode '{s}' (expected paper or squared)")),
        }
    }
}

impl std::fmt::Display for MetricMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Paper => "paper",
            Self::Squared => "squared",
        })
    }
}

fn check_len(what: &'static str, left: usize, right: usize) -> Result<(), EvalError> {
    if left != right {
        return Err(EvalError::LengthMismatch { what, left, right });
    }
    if left == 0 {
        return Err(EvalError::EmptyDynamicSet);
    }
    Ok(())
}

/// Root of the mean squared position error over objects.
pub fn rmse_pos(pred: &[Vec3], truth: &[Vec3]) -> Result<f64, EvalError> {
    check_len("positions", pred.len(), truth.len())?;
    let sum: f64 = pred.iter().zip(truth).map(|(&p, &t)| (p - t).norm_squared()).sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// `(360/π)·asin(‖vec(q̂ q⁻¹)‖)`: the relative rotation angle in degrees. The
/// vector-part norm is sign-invariant, so `q` and `−q` agree.
pub fn orientation_error_deg(pred: Quaternion, truth: Quaternion) -> f64 {
    // vec(p q*) = q_w p_v − p_w q_v − p_v × q_v, ordered so that q = ±p
    // cancels exactly.
    let (pv, tv) = (pred.vector(), truth.vector());
    let v = pv * truth.w - tv * pred.w - pv.cross(tv);
    let s = v.norm() / (pred.norm() * truth.norm());
    360.0 / std::f64::consts::PI * s.clamp(0.0, 1.0).asin()
}

pub fn rmse_ori(pred: &[Quaternion], truth: &[Quaternion], mode: MetricMode) -> Result<f64, EvalError> {
    check_len("orientations", pred.len(), truth.len())?;
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .map(|(&p, &t)| {
            let a = orientation_error_deg(p, t);
            match mode {
                MetricMode::Paper => a,
                MetricMode::Squared => a * a,
            }
        })
        .sum();
    Ok((sum / pred.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectError {
    pub object: usize,
    /// Mean over trajectories of the position error (m).
    pub position: f64,
    /// Mean over trajectories of the rotation angle (degrees).
    pub angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub requested: usize,
    pub horizon: usize,
    pub clamped: bool,
    /// Mean over trajectories.
    pub rmse_pos: f64,
    pub rmse_ori: f64,
    pub objects: Vec<ObjectError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub checkpoint: String,
    pub metric_mode: MetricMode,
    pub trajectories: usize,
    /// Largest horizon present in every pair.
    pub available_horizon: usize,
    pub horizons: Vec<HorizonReport>,
}

impl MetricReport {
    pub fn clamped(&self) -> impl Iterator<Item = &HorizonReport> {
        self.horizons.iter().filter(|h| h.clamped)
    }
}

fn dynamic_ids(t: &Trajectory) -> Vec<usize> {
    t.dynamic_objects()
}

/// Metrics at rollout step `T` (frame `T + 1`) for each requested horizon,
/// averaged over the trajectory pairs. Horizons beyond the shortest pair are
/// clamped and flagged.
pub fn evaluate_trajectories(
    pairs: &[(&Trajectory, &Trajectory)],
    horizons: &[usize],
    mode: MetricMode,
    dataset: &str,
    checkpoint: &str,
) -> Result<MetricReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyDynamicSet);
    }
    for (p, t) in pairs {
        check_len("objects", p.object_count(), t.object_count())?;
        if dynamic_ids(p) != dynamic_ids(t) {
            return Err(EvalError::InvalidEdit("prediction and truth disagree on which objects are dynamic".into()));
        }
        if p.frame_count() < 3 || t.frame_count() < 3 {
            return Err(EvalError::LengthMismatch { what: "frames (need at least 3)", left: p.frame_count(), right: t.frame_count() });
        }
    }
    let available = pairs.iter().map(|(p, t)| p.frame_count().min(t.frame_count()) - 2).min().unwrap();
    let ids = dynamic_ids(pairs[0].0);
    // Per-object rows only make sense when every pair has the same layout.
    let uniform = pairs.iter().all(|(p, _)| dynamic_ids(p) == ids);
    let mut out = Vec::new();
    for &requested in horizons {
        let horizon = requested.clamp(1, available);
        let frame = horizon + 1;
        let mut pos = 0.0;
        let mut ori = 0.0;
        let mut objects: Vec<ObjectError> =
            ids.iter().map(|&object| ObjectError { object, position: 0.0, angle_deg: 0.0 }).collect();
        for (p, t) in pairs {
            let ids = dynamic_ids(p);
            let pp: Vec<Vec3> = ids.iter().map(|&k| p.frames[frame][k].position).collect();
            let tp: Vec<Vec3> = ids.iter().map(|&k| t.frames[frame][k].position).collect();
            let pq: Vec<Quaternion> = ids.iter().map(|&k| p.frames[frame][k].orientation).collect();
            let tq: Vec<Quaternion> = ids.iter().map(|&k| t.frames[frame][k].orientation).collect();
            pos += rmse_pos(&pp, &tp)?;
            ori += rmse_ori(&pq, &tq, mode)?;
            if uniform {
                for (j, o) in objects.iter_mut().enumerate() {
                    o.position += (pp[j] - tp[j]).norm();
                    o.angle_deg += orientation_error_deg(pq[j], tq[j]);
                }
            }
        }
        let n = pairs.len() as f64;
        for o in objects.iter_mut() {
            o.position /= n;
            o.angle_deg /= n;
        }
        out.push(HorizonReport {
            requested,
            horizon,
            clamped: horizon != requested,
            rmse_pos: pos / n,
            rmse_ori: ori / n,
            objects: if uniform { objects } else { Vec::new() },
        });
    }
    Ok(MetricReport {
        dataset: dataset.into(),
        checkpoint: checkpoint.into(),
        metric_mode: mode,
        trajectories: pairs.len(),
        available_horizon: available,
        horizons: out,
    })
}
