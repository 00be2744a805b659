//! Triangle primitives and exact triangle–triangle closest points.
//!
//! The global minimum distance between two triangles is attained either at a
//! vertex–face pair or an edge–edge pair; intersecting triangles additionally
//! produce an edge that pierces the other face. All three candidate families
//! are enumerated in a fixed order and the first strict minimum wins.

use super::{GeometryError, Vec3};

pub type Triangle = [Vec3; 3];

/// Cross-product norm below which a triangle counts as degenerate.
pub const DEGENERATE_TOLERANCE: f64 = 1e-12;

/// Un-normalized normal `(v1 − v0) × (v2 − v0)`; its norm is twice the area.
pub fn triangle_normal(tri: &Triangle) -> Result<Vec3, GeometryError> {
    let n = (tri[1] - tri[0]).cross(tri[2] - tri[0]);
    if !(n.norm() >= DEGENERATE_TOLERANCE) {
        return Err(GeometryError::DegenerateTriangle);
    }
    Ok(n)
}

/// Result of a triangle pair query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoints {
    /// Point on the first (sender) triangle.
    pub p_s: Vec3,
    /// Point on the second (receiver) triangle.
    pub p_r: Vec3,
    pub dist: f64,
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(p: Vec3, tri: &Triangle) -> Vec3 {
    let [a, b, c] = *tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Closest points between segments `p0p1` and `q0q1`.
pub fn closest_points_segments(p0: Vec3, p1: Vec3, q0: Vec3, q1: Vec3) -> (Vec3, Vec3) {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.dot(d1);
    let e = d2.dot(d2);
    let f = d2.dot(r);
    let eps = 1e-300;
    let (s, t);
    if a <= eps && e <= eps {
        return (p0, q0);
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    (p0 + d1 * s, q0 + d2 * t)
}

/// Point where segment `p0p1` crosses the interior or boundary of `tri`, if any.
/// Segments lying in the triangle's plane are ignored (edge–edge covers them).
fn segment_triangle_intersection(p0: Vec3, p1: Vec3, tri: &Triangle) -> Option<Vec3> {
    let dir = p1 - p0;
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let h = dir.cross(e2);
    let det = e1.dot(h);
    let scale = dir.norm() * e1.norm() * e2.norm();
    if det.abs() <= 1e-14 * scale {
        return None;
    }
    let inv = 1.0 / det;
    let s = p0 - tri[0];
    let u = s.dot(h) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv;
    if !(0.0..=1.0).contains(&t) {
        return None;
    }
    Some(tri[0] + e1 * u + e2 * v)
}

fn is_degenerate(tri: &Triangle) -> bool {
    triangle_normal(tri).is_err()
}

fn lexicographic_key(tri: &Triangle) -> [f64; 9] {
    let mut k = [0.0; 9];
    for (i, v) in tri.iter().enumerate() {
        k[3 * i..3 * i + 3].copy_from_slice(&v.to_array());
    }
    k
}

/// Global closest points between two non-degenerate triangles.
///
/// Symmetric: swapping the arguments swaps `p_s`/`p_r` and leaves `dist`
/// bitwise identical, because the pair is always evaluated in a canonical
/// (lexicographic) order.
pub fn closest_points(tri_s: &Triangle, tri_r: &Triangle) -> Result<ClosestPoints, GeometryError> {
    if is_degenerate(tri_s) || is_degenerate(tri_r) {
        return Err(GeometryError::DegenerateTriangle);
    }
    let ks = lexicographic_key(tri_s);
    let kr = lexicographic_key(tri_r);
    let swapped = ks
        .iter()
        .zip(kr.iter())
        .find_map(|(a, b)| match a.total_cmp(b) {
            std::cmp::Ordering::Equal => None,
            o => Some(o == std::cmp::Ordering::Greater),
        })
        .unwrap_or(false);
    if swapped {
        let c = closest_points_ordered(tri_r, tri_s);
        Ok(ClosestPoints { p_s: c.p_r, p_r: c.p_s, dist: c.dist })
    } else {
        Ok(closest_points_ordered(tri_s, tri_r))
    }
}

fn closest_points_ordered(a: &Triangle, b: &Triangle) -> ClosestPoints {
    let mut best = (f64::INFINITY, Vec3::ZERO, Vec3::ZERO);
    fn consider(best: &mut (f64, Vec3, Vec3), pa: Vec3, pb: Vec3) {
        let d2 = (pa - pb).norm_squared();
        if d2 < best.0 {
            *best = (d2, pa, pb);
        }
    }
    // Vertex–face.
    for &v in a {
        consider(&mut best, v, closest_point_on_triangle(v, b));
    }
    for &v in b {
        consider(&mut best, closest_point_on_triangle(v, a), v);
    }
    // Edge–edge.
    for i in 0..3 {
        let (a0, a1) = (a[i], a[(i + 1) % 3]);
        for j in 0..3 {
            let (b0, b1) = (b[j], b[(j + 1) % 3]);
            let (pa, pb) = closest_points_segments(a0, a1, b0, b1);
            consider(&mut best, pa, pb);
        }
    }
    // Piercing edges (only reachable when the triangles intersect).
    if best.0 > 0.0 {
        for i in 0..3 {
            if let Some(p) = segment_triangle_intersection(a[i], a[(i + 1) % 3], b) {
                consider(&mut best, p, p);
            }
        }
        for j in 0..3 {
            if let Some(p) = segment_triangle_intersection(b[j], b[(j + 1) % 3], a) {
                consider(&mut best, p, p);
            }
        }
    }
    ClosestPoints { p_s: best.1, p_r: best.2, dist: best.0.sqrt() }
}

/// Barycentric coordinates of `p` with respect to `tri` (p assumed in-plane).
pub fn barycentric(p: Vec3, tri: &Triangle) -> [f64; 3] {
    let v0 = tri[1] - tri[0];
    let v1 = tri[2] - tri[0];
    let v2 = p - tri[0];
    let d00 = v0.dot(v0);
    let d01 = v0.dot(v1);
    let d11 = v1.dot(v1);
    let d20 = v2.dot(v0);
    let d21 = v2.dot(v1);
    let denom = d00 * d11 - d01 * d01;
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    [1.0 - v - w, v, w]
}
