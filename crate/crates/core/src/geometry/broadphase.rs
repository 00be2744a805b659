use super::Vec3;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y && min.z <= max.z);
        Self { min, max }
    }

    pub fn from_points(points: &[Vec3]) -> Self {
        let mut min = Vec3::splat(f64::INFINITY);
        let mut max = Vec3::splat(f64::NEG_INFINITY);
        for &p in points {
            min = min.min(p);
            max = max.max(p);
        }
        Self { min, max }
    }

    /// True when the per-axis gap between the boxes never exceeds `margin`.
    pub fn within(&self, other: &Aabb, margin: f64) -> bool {
        (0..3).all(|a| {
            self.min[a] - other.max[a] <= margin && other.min[a] - self.max[a] <= margin
        })
    }
}

/// All index pairs `(i, j)`, `i < j`, whose boxes are closer than `margin`
/// on every axis (equivalently: both boxes inflated by `margin / 2` overlap).
///
/// Sweep-and-prune along x; the result is sorted.
pub fn aabb_pairs(boxes: &[Aabb], margin: f64) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| boxes[a].min.x.total_cmp(&boxes[b].min.x).then(a.cmp(&b)));
    let mut pairs = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        let reach = boxes[i].max.x + margin;
        for &j in &order[k + 1..] {
            if boxes[j].min.x > reach {
                break;
            }
            if boxes[i].within(&boxes[j], margin) {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}
