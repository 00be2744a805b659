use ndarray::Array2;

use super::EngineError;
use crate::complex::{build_complex, detect_contacts, CombinatorialComplex};
use crate::features::{build_features, FrameHistory, PhysicalParams};
use crate::geometry::{shape_match, Vec3};
use crate::model::HopNet;
use crate::sim::{pose_nodes, ObjectSpec, Pose, Trajectory, GENERATOR_VERSION};

/// Anything that maps a frame history to physical node accelerations.
pub trait Predictor {
    fn contact_radius(&self) -> f64;

    /// N×3 accelerations for `history.current`; `complex` already holds the
    /// contacts at the current positions.
    fn predict(
        &self,
        history: &FrameHistory,
        complex: &CombinatorialComplex,
        physical: &[PhysicalParams],
    ) -> Result<Array2<f64>, EngineError>;
}

impl Predictor for HopNet {
    fn contact_radius(&self) -> f64 {
        self.config.contact_radius
    }

    fn predict(
        &self,
        history: &FrameHistory,
        complex: &CombinatorialComplex,
        physical: &[PhysicalParams],
    ) -> Result<Array2<f64>, EngineError> {
        let raw = build_features(history, complex, physical, self.config.features())?;
        let (node, _) = self.forward(&self.normalizers.features.normalize_frozen(&raw), complex)?;
        Ok(self.normalizers.node_target.denormalize(&node))
    }
}

/// Initial condition of a rollout: the objects and their poses at frames
/// `t−1` and `t`. The earlier frame also serves as the reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutInit {
    /// Stable object ids, used by edits after removals.
    pub ids: Vec<usize>,
    pub objects: Vec<ObjectSpec>,
    pub previous: Vec<Pose>,
    pub current: Vec<Pose>,
    pub seed: u64,
}

impl RolloutInit {
    /// Frames 0 and 1 of `traj`; nothing later is read.
    pub fn from_trajectory(traj: &Trajectory) -> Result<Self, EngineError> {
        if traj.frame_count() < 2 {
            return Err(EngineError::OutOfRange { t: 1, frames: traj.frame_count() });
        }
        Ok(Self {
            ids: (0..traj.object_count()).collect(),
            objects: traj.objects.clone(),
            previous: traj.frames[0].clone(),
            current: traj.frames[1].clone(),
            seed: traj.seed,
        })
    }

    pub fn position(&self, id: usize) -> Option<usize> {
        self.ids.iter().position(|&i| i == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    /// Predicted poses of every object for steps `1..=horizon`.
    pub poses: Vec<Vec<Pose>>,
    pub nodes: Vec<Vec<Vec3>>,
    /// Shape-match RMS residual per step and object (0 for static objects).
    pub residuals: Vec<Vec<f64>>,
}

impl RolloutResult {
    /// Initial frames followed by the predictions, in the trajectory format.
    pub fn to_trajectory(&self, init: &RolloutInit) -> Trajectory {
        let mut frames = vec![init.previous.clone(), init.current.clone()];
        frames.extend(self.poses.iter().cloned());
        Trajectory { seed: init.seed, generator_version: GENERATOR_VERSION, objects: init.objects.clone(), frames }
    }
}

/// Autoregressive rollout: predict accelerations, integrate
/// `x^{t+1} = ẍ + 2x^t − x^{t−1}`, then snap every dynamic object to the
/// rigid transform that best maps its mesh at `t` onto the integrated nodes.
pub fn rollout<P: Predictor + ?Sized>(
    predictor: &P,
    init: &RolloutInit,
    horizon: usize,
) -> Result<RolloutResult, EngineError> {
    if horizon == 0 {
        return Err(EngineError::InvalidConfig("rollout horizon must be at least 1".into()));
    }
    if init.objects.iter().all(|o| o.is_static) {
        return Err(EngineError::EmptyDynamicSet);
    }
    let meshes: Vec<_> = init.objects.iter().map(|o| o.mesh.topology(o.is_static)).collect();
    let base = build_complex(&meshes)?;
    let physical: Vec<PhysicalParams> = init.objects.iter().map(|o| o.physical()).collect();
    let previous = pose_nodes(&init.objects, &init.previous);
    let mut history = FrameHistory::new(previous.clone(), previous, pose_nodes(&init.objects, &init.current));
    let mut poses = init.current.clone();

    let mut out = RolloutResult { poses: Vec::new(), nodes: Vec::new(), residuals: Vec::new() };
    for _ in 0..horizon {
        let cc = detect_contacts(&base, &history.current, predictor.contact_radius());
        let acc = predictor.predict(&history, &cc, &physical)?;
        let mut residuals = vec![0.0; init.objects.len()];
        for (k, o) in cc.objects().iter().enumerate() {
            if o.is_static {
                continue;
            }
            let cur = &history.current[o.nodes.clone()];
            let integrated: Vec<Vec3> = o
                .nodes
                .clone()
                .map(|i| {
                    let a = Vec3::new(acc[[i, 0]], acc[[i, 1]], acc[[i, 2]]);
                    a + history.current[i] * 2.0 - history.previous[i]
                })
                .collect();
            let fit = shape_match(cur, &integrated, &vec![1.0; cur.len()])?;
            let pose = poses[k];
            poses[k] = Pose::new(
                fit.apply(pose.position),
                (fit.rotation * pose.orientation).normalized()?,
            );
            residuals[k] = fit.residual;
        }
        let nodes = pose_nodes(&init.objects, &poses);
        history.advance(nodes.clone());
        out.poses.push(poses.clone());
        out.nodes.push(nodes);
        out.residuals.push(residuals);
    }
    Ok(out)
}
