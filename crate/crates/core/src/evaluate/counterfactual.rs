use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::engine::RolloutInit;
use crate::geometry::{Quaternion, Vec3};
use crate::sim::Pose;

/// Edit of a rollout's initial condition. Ids are the stable object ids of
/// the [`RolloutInit`], so edits stay valid after removals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edit {
    RemoveObject(usize),
    SetMass(usize, f64),
    /// Linear velocity in m/step, encoded by moving the `t−1` frame.
    SetVelocity(usize, Vec3),
    /// New pose at `t`; the `t−1` pose moves along so velocities are kept.
    SetPose(usize, Vec3, Quaternion),
}

impl Edit {
    pub fn object(&self) -> usize {
        match *self {
            Edit::RemoveObject(id) | Edit::SetMass(id, _) | Edit::SetVelocity(id, _) | Edit::SetPose(id, _, _) => id,
        }
    }
}

/// Applies `edit` consistently to both initial frames.
pub fn apply_counterfactual(init: &RolloutInit, edit: &Edit) -> Result<RolloutInit, EvalError> {
    let id = edit.object();
    let k = init.position(id).ok_or(EvalError::UnknownObject(id))?;
    if init.objects[k].is_static {
        return Err(EvalError::EditOnStatic(id));
    }
    let mut out = init.clone();
    match *edit {
        Edit::RemoveObject(_) => {
            out.ids.remove(k);
            out.objects.remove(k);
            out.previous.remove(k);
            out.current.remove(k);
        }
        Edit::SetMass(_, m) => {
            if !(m > 0.0 && m.is_finite()) {
                return Err(EvalError::InvalidEdit(format!("mass must be positive, got {m}")));
            }
            out.objects[k].mass = m;
        }
        Edit::SetVelocity(_, v) => {
            if !v.is_finite() {
                return Err(EvalError::InvalidEdit("velocity must be finite".into()));
            }
            out.previous[k].position = out.current[k].position - v;
        }
        Edit::SetPose(_, position, orientation) => {
            let q = orientation
                .normalized()
                .map_err(|_| EvalError::InvalidEdit("orientation must be a non-zero quaternion".into()))?;
            if !position.is_finite() {
                return Err(EvalError::InvalidEdit("position must be finite".into()));
            }
            let (prev, cur) = (init.previous[k], init.current[k]);
            let spin = cur.orientation * prev.orientation.conjugate();
            out.current[k] = Pose::new(position, q);
            out.previous[k] = Pose::new(
                position - (cur.position - prev.position),
                (spin.conjugate() * q).normalized().expect("product of unit quaternions"),
            );
        }
    }
    Ok(out)
}
