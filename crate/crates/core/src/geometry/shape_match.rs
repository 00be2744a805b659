//! Weighted least-squares rigid registration (shape matching).

use super::{quat_from_matrix, GeometryError, Mat3, Quaternion, Vec3};

/// Rigid transform `x ↦ R·x + t` recovered by [`shape_match`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidFit {
    pub translation: Vec3,
    pub rotation: Quaternion,
    /// Weighted RMS distance between the transformed reference and the targets.
    pub residual: f64,
}

impl RigidFit {
    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }
}

/// Rotation `R` and translation `t` minimizing `Σ wᵢ‖R·refᵢ + t − targetᵢ‖²`.
///
/// The cross-covariance `H = Σ wᵢ (refᵢ − c_ref)(targetᵢ − c_tgt)ᵀ` is factored
/// through the Jacobi eigen-decomposition of `HᵀH`; the third singular axes are
/// rebuilt as cross products, which makes the result a proper rotation and
/// applies the reflection correction on the smallest singular axis.
pub fn shape_match(
    ref_points: &[Vec3],
    target_points: &[Vec3],
    weights: &[f64],
) -> Result<RigidFit, GeometryError> {
    let n = ref_points.len();
    if n < 3 || target_points.len() != n || weights.len() != n {
        return Err(GeometryError::DegenerateConfiguration);
    }
    if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(GeometryError::DegenerateConfiguration);
    }
    let total: f64 = weights.iter().sum();
    let weighted_mean = |pts: &[Vec3]| {
        pts.iter()
            .zip(weights)
            .fold(Vec3::ZERO, |acc, (&p, &w)| acc + p * w)
            / total
    };
    let c_ref = weighted_mean(ref_points);
    let c_tgt = weighted_mean(target_points);

    let mut h = Mat3::ZERO;
    for ((&p, &q), &w) in ref_points.iter().zip(target_points).zip(weights) {
        h = h + Mat3::outer(p - c_ref, (q - c_tgt) * w);
    }

    let (eigvals, v) = (h.transpose() * h).symmetric_eigen();
    let s1 = eigvals.x.max(0.0).sqrt();
    let s2 = eigvals.y.max(0.0).sqrt();
    if !(s1 > 0.0) || !(s2 > 1e-12 * s1) || !s1.is_finite() {
        return Err(GeometryError::DegenerateConfiguration);
    }

    let v1 = v.col(0);
    let v2 = (v.col(1) - v1 * v1.dot(v.col(1)))
        .try_normalize()
        .ok_or(GeometryError::DegenerateConfiguration)?;
    let v3 = v1.cross(v2);
    let u1 = (h * v1)
        .try_normalize()
        .ok_or(GeometryError::DegenerateConfiguration)?;
    let hv2 = h * v2;
    let u2 = (hv2 - u1 * u1.dot(hv2))
        .try_normalize()
        .ok_or(GeometryError::DegenerateConfiguration)?;
    let u3 = u1.cross(u2);

    let rot = Mat3::outer(v1, u1) + Mat3::outer(v2, u2) + Mat3::outer(v3, u3);
    let rotation = quat_from_matrix(&rot);
    let translation = c_tgt - rot * c_ref;

    let sq: f64 = ref_points
        .iter()
        .zip(target_points)
        .zip(weights)
        .map(|((&p, &q), &w)| w * (rot * p + translation - q).norm_squared())
        .sum();
    let residual = (sq / total).sqrt();

    Ok(RigidFit { translation, rotation, residual })
}
