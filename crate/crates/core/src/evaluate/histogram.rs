use serde::{Deserialize, Serialize};

use crate::complex::{detect_contacts, CombinatorialComplex};
use crate::geometry::{barycentric, closest_points, Vec3};

pub const HISTOGRAM_BIN_WIDTH: f64 = 0.01;

/// Counts per bin `[k·w, (k+1)·w)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(bin_width: f64) -> Self {
        Self { bin_width, counts: Vec::new() }
    }

    /// Values within 1e-9 of a bin edge count toward the upper bin, so
    /// speeds such as 0.2 land in the 0.20 bin despite round-off.
    pub fn bin(&self, value: f64) -> usize {
        (value / self.bin_width + 1e-9).floor().max(0.0) as usize
    }

    pub fn add(&mut self, value: f64) {
        let b = self.bin(value);
        if self.counts.len() <= b {
            self.counts.resize(b + 1, 0);
        }
        self.counts[b] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Lower edge of bin `k`.
    pub fn edge(&self, k: usize) -> f64 {
        k as f64 * self.bin_width
    }
}

fn point_velocity(tri: [usize; 3], p: Vec3, previous: &[Vec3], current: &[Vec3]) -> Vec3 {
    let pts = [current[tri[0]], current[tri[1]], current[tri[2]]];
    let w = barycentric(p, &pts);
    (0..3).fold(Vec3::ZERO, |acc, i| acc + (current[tri[i]] - previous[tri[i]]) * w[i])
}

/// Relative speed of the closest points of every contact in `cc`, using the
/// backward-difference node velocities `current − previous`.
pub fn contact_speeds(cc: &CombinatorialComplex, previous: &[Vec3], current: &[Vec3]) -> Vec<f64> {
    cc.contacts()
        .iter()
        .filter_map(|c| {
            let (s, r) = (&cc.faces()[c.sender], &cc.faces()[c.receiver]);
            let cp = closest_points(&s.positions(current), &r.positions(current)).ok()?;
            let vs = point_velocity(s.node_ids, cp.p_s, previous, current);
            let vr = point_velocity(r.node_ids, cp.p_r, previous, current);
            Some((vs - vr).norm())
        })
        .collect()
}

/// One sample per (directed contact, frame) for frames `1..` of every
/// trajectory, given as node positions per frame with their complex.
pub fn collision_speed_histogram<'a>(
    trajectories: impl IntoIterator<Item = (&'a CombinatorialComplex, &'a [Vec<Vec3>])>,
    d_c: f64,
) -> Histogram {
    let mut h = Histogram::new(HISTOGRAM_BIN_WIDTH);
    for (base, frames) in trajectories {
        for t in 1..frames.len() {
            let cc = detect_contacts(base, &frames[t], d_c);
            for s in contact_speeds(&cc, &frames[t - 1], &frames[t]) {
                h.add(s);
            }
        }
    }
    h
}
