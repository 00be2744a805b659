//! One step of the impulse-based rigid-body integrator.
//!
//! Order: gravity, contact generation on the current poses, sequential
//! impulses (normal with restitution, Coulomb friction), semi-implicit pose
//! update, positional projection of remaining penetration.

use serde::{Deserialize, Serialize};

use super::body::{inertia_world, inverse_inertia_world, BodyState, ObjectSpec, Pose, Shape, SimError, SimState};
use crate::geometry::{Mat3, Quaternion, Vec3};

pub const DEFAULT_GRAVITY: Vec3 = Vec3::new(0.0, 0.0, -0.0098);

fn default_iterations() -> usize {
    10
}
fn default_baumgarte() -> f64 {
    0.2
}
fn default_speed_cap() -> f64 {
    5.0
}

/// Solver settings; gravity lives on the state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Fraction of the penetration removed per step.
    #[serde(default = "default_baumgarte")]
    pub baumgarte: f64,
    /// m/step, checked against linear and rim speeds.
    #[serde(default = "default_speed_cap")]
    pub speed_cap: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            iterations: default_iterations(),
            baumgarte: default_baumgarte(),
            speed_cap: default_speed_cap(),
        }
    }
}

/// Contact between bodies `a < b`; `normal` points from `a` to `b` and `gap`
/// is negative when penetrating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyContact {
    pub a: usize,
    pub b: usize,
    pub point: Vec3,
    pub normal: Vec3,
    pub gap: f64,
}

/// Closest point of an origin-centered box to local point `p`:
/// (closest point, outward normal, signed distance).
fn point_box(p: Vec3, h: Vec3) -> (Vec3, Vec3, f64) {
    let d = Vec3::new(p.x.abs() - h.x, p.y.abs() - h.y, p.z.abs() - h.z);
    if d.x > 0.0 || d.y > 0.0 || d.z > 0.0 {
        let q = p.min(h).max(h * -1.0);
        let diff = p - q;
        let dist = diff.norm();
        (q, diff / dist, dist)
    } else {
        let axis = if d.x >= d.y && d.x >= d.z {
            0
        } else if d.y >= d.z {
            1
        } else {
            2
        };
        let mut n = [0.0; 3];
        let s = if p[axis] >= 0.0 { 1.0 } else { -1.0 };
        n[axis] = s;
        let mut q = p.to_array();
        q[axis] = s * h[axis];
        (Vec3::from_array(q), Vec3::from_array(n), d[axis])
    }
}

fn box_corners(pose: &Pose, h: Vec3) -> [Vec3; 8] {
    let mut out = [Vec3::ZERO; 8];
    for (i, c) in out.iter_mut().enumerate() {
        let s = |bit: usize| if i & bit != 0 { 1.0 } else { -1.0 };
        *c = pose.apply(Vec3::new(s(1) * h.x, s(2) * h.y, s(4) * h.z));
    }
    out
}

/// Contacts with normal from the first shape to the second.
fn shape_contacts(sa: &Shape, pa: &Pose, sb: &Shape, pb: &Pose, margin: f64, out: &mut Vec<(Vec3, Vec3, f64)>) {
    match (*sa, *sb) {
        (Shape::Plane { .. }, Shape::Plane { .. }) => {}
        (Shape::Plane { .. }, Shape::Sphere { radius, .. }) => {
            let n = pa.orientation.rotate(Vec3::Z);
            let gap = n.dot(pb.position - pa.position) - radius;
            if gap < margin {
                out.push((pb.position - n * (radius + 0.5 * gap), n, gap));
            }
        }
        (Shape::Plane { .. }, Shape::Box { half_extents, .. }) => {
            let n = pa.orientation.rotate(Vec3::Z);
            for w in box_corners(pb, half_extents) {
                let gap = n.dot(w - pa.position);
                if gap < margin {
                    out.push((w - n * (0.5 * gap), n, gap));
                }
            }
        }
        (Shape::Sphere { radius: ra, .. }, Shape::Sphere { radius: rb, .. }) => {
            let d = pb.position - pa.position;
            let dist = d.norm();
            let n = d.try_normalize().unwrap_or(Vec3::Z);
            let gap = dist - ra - rb;
            if gap < margin {
                out.push((pa.position + n * (ra + 0.5 * gap), n, gap));
            }
        }
        (Shape::Box { half_extents, .. }, Shape::Sphere { radius, .. }) => {
            let (q, n, dist) = point_box(pa.to_local(pb.position), half_extents);
            let gap = dist - radius;
            if gap < margin {
                let n = pa.orientation.rotate(n);
                out.push((pa.apply(q) + n * (0.5 * gap), n, gap));
            }
        }
        (Shape::Box { half_extents: ha, .. }, Shape::Box { half_extents: hb, .. }) => {
            // Corners of b near a (normal a→b), then corners of a near b.
            for w in box_corners(pb, hb) {
                let (q, n, gap) = point_box(pa.to_local(w), ha);
                if gap < margin {
                    let n = pa.orientation.rotate(n);
                    out.push((pa.apply(q) + n * (0.5 * gap), n, gap));
                }
            }
            for w in box_corners(pa, ha) {
                let (q, n, gap) = point_box(pb.to_local(w), hb);
                if gap < margin {
                    let n = pb.orientation.rotate(n);
                    out.push((pb.apply(q) + n * (0.5 * gap), n * -1.0, gap));
                }
            }
        }
        _ => {
            let start = out.len();
            shape_contacts(sb, pb, sa, pa, margin, out);
            for c in &mut out[start..] {
                c.1 = c.1 * -1.0;
            }
        }
    }
}

/// All contacts with gap below `margin`, ordered by body pair.
pub fn body_contacts(poses: &[Pose], specs: &[ObjectSpec], margin: &dyn Fn(usize, usize) -> f64) -> Vec<BodyContact> {
    let mut contacts = Vec::new();
    let mut buf = Vec::new();
    for a in 0..specs.len() {
        for b in a + 1..specs.len() {
            if specs[a].is_static && specs[b].is_static {
                continue;
            }
            let m = margin(a, b);
            let reach = specs[a].shape.bounding_radius() + specs[b].shape.bounding_radius() + m;
            let planar = matches!(specs[a].shape, Shape::Plane { .. }) || matches!(specs[b].shape, Shape::Plane { .. });
            if !planar && (poses[b].position - poses[a].position).norm() > reach {
                continue;
            }
            buf.clear();
            shape_contacts(&specs[a].shape, &poses[a], &specs[b].shape, &poses[b], m, &mut buf);
            contacts.extend(buf.iter().map(|&(point, normal, gap)| BodyContact { a, b, point, normal, gap }));
        }
    }
    contacts
}

struct Body {
    inv_mass: f64,
    inv_inertia: Mat3,
}

struct Row {
    a: usize,
    b: usize,
    n: Vec3,
    ra: Vec3,
    rb: Vec3,
    target: f64,
    kn: f64,
    mu: f64,
    jn: f64,
    jt: Vec3,
}

fn point_velocity(s: &BodyState, r: Vec3) -> Vec3 {
    s.velocity + s.angular_velocity.cross(r)
}

fn effective(bodies: &[Body], a: usize, b: usize, ra: Vec3, rb: Vec3, d: Vec3) -> f64 {
    let (ba, bb) = (&bodies[a], &bodies[b]);
    let ca = ra.cross(d);
    let cb = rb.cross(d);
    ba.inv_mass + bb.inv_mass + ca.dot(ba.inv_inertia * ca) + cb.dot(bb.inv_inertia * cb)
}

/// Applies impulse `j` to `b` and `-j` to `a`.
fn apply(state: &mut [BodyState], bodies: &[Body], row: &Row, j: Vec3) {
    let (ba, bb) = (&bodies[row.a], &bodies[row.b]);
    state[row.b].velocity += j * bb.inv_mass;
    state[row.b].angular_velocity += bb.inv_inertia * row.rb.cross(j);
    state[row.a].velocity -= j * ba.inv_mass;
    state[row.a].angular_velocity -= ba.inv_inertia * row.ra.cross(j);
}

fn integrate_orientation(q: Quaternion, w: Vec3) -> Quaternion {
    (Quaternion::from_rotation_vector(w) * q)
        .normalized()
        .expect("rotation of a unit quaternion stays non-zero")
}

fn body_energy(b: &BodyState, s: &ObjectSpec, g: Vec3) -> f64 {
    if s.is_static {
        return 0.0;
    }
    let w = b.angular_velocity;
    let rot = 0.5 * w.dot(inertia_world(s, b.pose.orientation) * w);
    s.mass * (0.5 * b.velocity.norm_squared() - g.dot(b.pose.position) + 0.5 * g.dot(b.velocity)) + rot
}

/// Groups of dynamic bodies connected through contacts; static bodies do not
/// connect their neighbours. Sorted by smallest member.
fn islands(specs: &[ObjectSpec], pairs: impl Iterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..specs.len()).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (a, b) in pairs {
        if specs[a].is_static || specs[b].is_static {
            continue;
        }
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        parent[ra.max(rb)] = ra.min(rb);
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); specs.len()];
    for i in (0..specs.len()).filter(|&i| !specs[i].is_static) {
        let r = root(&mut parent, i);
        groups[r].push(i);
    }
    groups.into_iter().filter(|g| !g.is_empty()).collect()
}

/// Kinetic part of the discrete energy. Per body it equals
/// `½m|v − g/2|² + ½ωᵀIω` up to a term fixed by the position the body
/// starts the step from.
fn motion_energy(b: &BodyState, s: &ObjectSpec, g: Vec3) -> f64 {
    let w = b.angular_velocity;
    0.5 * s.mass * (b.velocity - g * 0.5).norm_squared() + 0.5 * w.dot(inertia_world(s, b.pose.orientation) * w)
}

/// Advances the state by one unit step.
pub fn step(state: &SimState, specs: &[ObjectSpec], config: &PhysicsConfig) -> Result<SimState, SimError> {
    assert_eq!(state.bodies.len(), specs.len(), "state and specs disagree on object count");
    let g = state.gravity;
    let pre = state.bodies.clone();
    let mut cur = state.bodies.clone();
    let bodies: Vec<Body> = specs
        .iter()
        .zip(&cur)
        .map(|(s, b)| Body {
            inv_mass: s.inverse_mass(),
            inv_inertia: inverse_inertia_world(s, b.pose.orientation),
        })
        .collect();

    for (b, s) in cur.iter_mut().zip(specs) {
        if !s.is_static {
            b.velocity += g;
        }
    }

    let free = cur.clone();
    let poses: Vec<Pose> = cur.iter().map(|b| b.pose).collect();
    let speed = |i: usize| {
        let b = &cur[i];
        b.velocity.norm() + b.angular_velocity.norm() * specs[i].shape.bounding_radius()
    };
    let margin = |a: usize, b: usize| speed(a) + speed(b) + 1e-3;
    let contacts = body_contacts(&poses, specs, &margin);

    let mut rows = Vec::new();
    for c in &contacts {
        let ra = c.point - poses[c.a].position;
        let rb = c.point - poses[c.b].position;
        let vn0 = (point_velocity(&pre[c.b], rb) - point_velocity(&pre[c.a], ra)).dot(c.normal);
        let vn = (point_velocity(&cur[c.b], rb) - point_velocity(&cur[c.a], ra)).dot(c.normal);
        if c.gap + vn >= 0.0 {
            continue;
        }
        let allowed = -c.gap.max(0.0);
        let e = specs[c.a].restitution.max(specs[c.b].restitution);
        let target = if vn0 < 0.0 { (e * -vn0).max(allowed) } else { allowed };
        rows.push(Row {
            a: c.a,
            b: c.b,
            n: c.normal,
            ra,
            rb,
            target,
            kn: effective(&bodies, c.a, c.b, ra, rb, c.normal),
            mu: (specs[c.a].friction * specs[c.b].friction).sqrt(),
            jn: 0.0,
            jt: Vec3::ZERO,
        });
    }

    for _ in 0..config.iterations {
        for i in 0..rows.len() {
            let row = &rows[i];
            let vrel = point_velocity(&cur[row.b], row.rb) - point_velocity(&cur[row.a], row.ra);
            let vn = vrel.dot(row.n);
            let new_jn = (row.jn + (row.target - vn) / row.kn).max(0.0);
            let dj = new_jn - row.jn;
            if dj != 0.0 {
                apply(&mut cur, &bodies, row, row.n * dj);
                rows[i].jn = new_jn;
            }

            let row = &rows[i];
            if row.mu > 0.0 {
                let vrel = point_velocity(&cur[row.b], row.rb) - point_velocity(&cur[row.a], row.ra);
                let vt = vrel - row.n * vrel.dot(row.n);
                if let Some(t) = vt.try_normalize() {
                    let kt = effective(&bodies, row.a, row.b, row.ra, row.rb, t);
                    let mut jt = row.jt - vt / kt;
                    let limit = row.mu * row.jn;
                    if jt.norm() > limit {
                        jt = jt.try_normalize().unwrap_or(Vec3::ZERO) * limit;
                    }
                    let dj = jt - row.jt;
                    apply(&mut cur, &bodies, row, dj);
                    rows[i].jt = jt;
                }
            }
        }
    }

    // Sequential impulses can add energy, e.g. when stopping a body that was
    // sinking slower than one step of gravity. Shrink the contact island's
    // motion about g/2, where the energy is least, until it is back to the
    // gravity-only value. Islands keep objects that never touch independent.
    for island in islands(specs, contacts.iter().map(|c| (c.a, c.b))) {
        let before: f64 = island.iter().map(|&i| motion_energy(&free[i], &specs[i], g)).sum();
        let after: f64 = island.iter().map(|&i| motion_energy(&cur[i], &specs[i], g)).sum();
        if after <= before {
            continue;
        }
        let lambda = (before / after).sqrt();
        for &i in &island {
            let b = &mut cur[i];
            b.velocity = g * 0.5 + (b.velocity - g * 0.5) * lambda;
            b.angular_velocity *= lambda;
        }
    }

    for (i, b) in cur.iter_mut().enumerate() {
        if specs[i].is_static {
            *b = state.bodies[i];
            continue;
        }
        let s = b.velocity.norm().max(b.angular_velocity.norm() * specs[i].shape.bounding_radius());
        if !(s <= config.speed_cap) {
            return Err(SimError::NumericalBlowup { object: i, speed: s, cap: config.speed_cap });
        }
        b.pose.position += b.velocity;
        b.pose.orientation = integrate_orientation(b.pose.orientation, b.angular_velocity);
    }

    let mut pairs: Vec<(usize, usize)> = contacts.iter().map(|c| (c.a, c.b)).collect();
    let integrated: Vec<Vec3> = cur.iter().map(|b| b.pose.position).collect();
    if config.baumgarte > 0.0 {
        let poses: Vec<Pose> = cur.iter().map(|b| b.pose).collect();
        for c in body_contacts(&poses, specs, &|_, _| 0.0) {
            pairs.push((c.a, c.b));
            let (wa, wb) = (bodies[c.a].inv_mass, bodies[c.b].inv_mass);
            if c.gap >= 0.0 || wa + wb == 0.0 {
                continue;
            }
            let push = c.normal * (config.baumgarte * -c.gap / (wa + wb));
            cur[c.a].pose.position -= push * wa;
            cur[c.b].pose.position += push * wb;
        }
    }

    // Pushing a body out of penetration raises its potential energy; give
    // each island only as much push as its energy budget allows.
    let mut next = SimState { bodies: cur, gravity: g, step: state.step + 1 };
    for island in islands(specs, pairs.into_iter()) {
        let before: f64 = island.iter().map(|&i| body_energy(&state.bodies[i], &specs[i], g)).sum();
        let after: f64 = island.iter().map(|&i| body_energy(&next.bodies[i], &specs[i], g)).sum();
        let lift: f64 = island
            .iter()
            .map(|&i| -specs[i].mass * g.dot(next.bodies[i].pose.position - integrated[i]))
            .sum();
        if after <= before || lift <= 0.0 {
            continue;
        }
        let keep = (1.0 - (after - before) / lift).max(0.0);
        for &i in &island {
            let p = &mut next.bodies[i].pose.position;
            *p = integrated[i] + (*p - integrated[i]) * keep;
        }
    }
    Ok(next)
}
