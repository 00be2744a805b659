use hopnet::geometry::{Quaternion, Vec3};
use hopnet::sim::{
    body_contacts, generate_scene, mechanical_energy, simulate, simulate_trajectory, step, BodyState, ObjectSpec,
    PhysicsConfig, Pose, SceneConfig, Shape, SimError, SimState, Trajectory, DEFAULT_GRAVITY,
};

fn floor(friction: f64, restitution: f64) -> ObjectSpec {
    ObjectSpec::new(Shape::Plane { half_size: 20.0, tiles: 10 }, 0.0, friction, restitution, true)
}

fn sphere(radius: f64, mass: f64, friction: f64, restitution: f64) -> ObjectSpec {
    ObjectSpec::new(Shape::Sphere { radius, subdivision: 1 }, mass, friction, restitution, false)
}

fn body(position: Vec3, velocity: Vec3) -> BodyState {
    BodyState { pose: Pose::new(position, Quaternion::IDENTITY), velocity, angular_velocity: Vec3::ZERO }
}

fn state(bodies: Vec<BodyState>, gravity: Vec3) -> SimState {
    SimState { bodies, gravity, step: 0 }
}

fn momentum(s: &SimState, specs: &[ObjectSpec]) -> Vec3 {
    s.bodies.iter().zip(specs).filter(|(_, o)| !o.is_static).fold(Vec3::ZERO, |acc, (b, o)| acc + b.velocity * o.mass)
}

#[test]
fn frictionless_bounce_scales_speed_by_restitution() {
    let cfg = PhysicsConfig::default();
    for &e in &[0.0, 0.3, 0.5, 0.8, 1.0] {
        for &h in &[0.7, 1.3, 2.9] {
            let specs = vec![floor(0.0, 0.0), sphere(0.5, 1.3, 0.0, e)];
            let mut s = state(vec![BodyState::at_rest(Pose::IDENTITY), body(Vec3::new(0.2, -0.4, h), Vec3::ZERO)], DEFAULT_GRAVITY);
            let mut bounced = false;
            for _ in 0..400 {
                let next = step(&s, &specs, &cfg).unwrap();
                let (before, after) = (s.bodies[1].velocity, next.bodies[1].velocity);
                if before.z < 0.0 && after.z >= 0.0 {
                    assert!((after.z - e * -before.z).abs() < 1e-6, "e={e} h={h}: {} vs {}", after.z, e * -before.z);
                    assert!(after.x.abs() < 1e-15 && after.y.abs() < 1e-15);
                    bounced = true;
                    break;
                }
                s = next;
            }
            assert!(bounced, "no bounce for e={e} h={h}");
        }
    }
}

#[test]
fn equal_mass_elastic_head_on_exchanges_velocities() {
    let cfg = PhysicsConfig::default();
    for &(va, vb) in &[(0.05, -0.05), (0.08, 0.0), (0.03, -0.11)] {
        let specs = vec![sphere(0.5, 1.7, 0.0, 1.0), sphere(0.5, 1.7, 0.0, 1.0)];
        let initial = state(
            vec![body(Vec3::new(-1.5, 0.3, 1.0), Vec3::new(va, 0.0, 0.0)), body(Vec3::new(1.5, 0.3, 1.0), Vec3::new(vb, 0.0, 0.0))],
            Vec3::ZERO,
        );
        let traj = simulate(0, specs.clone(), initial.clone(), &cfg, 200).unwrap();
        let mut s = initial;
        for _ in 0..200 {
            s = step(&s, &specs, &cfg).unwrap();
        }
        assert!((s.bodies[0].velocity - Vec3::new(vb, 0.0, 0.0)).norm() < 1e-6, "{:?}", s.bodies[0].velocity);
        assert!((s.bodies[1].velocity - Vec3::new(va, 0.0, 0.0)).norm() < 1e-6, "{:?}", s.bodies[1].velocity);
        assert_eq!(traj.frames.last().unwrap(), &s.poses());
    }
}

#[test]
fn momentum_conserved_without_gravity_or_floor() {
    let cfg = PhysicsConfig::default();
    let specs = vec![
        sphere(0.5, 1.0, 0.4, 0.7),
        ObjectSpec::new(Shape::Box { half_extents: Vec3::splat(0.4), subdivision: 1 }, 2.5, 0.3, 0.5, false),
        sphere(0.6, 0.7, 0.0, 1.0),
    ];
    let mut s = state(
        vec![
            body(Vec3::new(-2.0, 0.1, 0.0), Vec3::new(0.06, 0.0, 0.01)),
            BodyState {
                pose: Pose::new(Vec3::new(0.0, 0.0, 0.2), Quaternion::from_rotation_vector(Vec3::new(0.3, -0.2, 0.9))),
                velocity: Vec3::new(0.0, -0.01, 0.0),
                angular_velocity: Vec3::new(0.01, 0.02, -0.03),
            },
            body(Vec3::new(2.1, -0.2, 0.1), Vec3::new(-0.07, 0.0, 0.0)),
        ],
        Vec3::ZERO,
    );
    let p0 = momentum(&s, &specs);
    let mut contacts_seen = 0;
    for _ in 0..150 {
        contacts_seen += body_contacts(&s.poses(), &specs, &|_, _| 0.2).len();
        let next = step(&s, &specs, &cfg).unwrap();
        assert!((momentum(&next, &specs) - momentum(&s, &specs)).norm() < 1e-9);
        s = next;
    }
    assert!(contacts_seen > 0);
    assert!((momentum(&s, &specs) - p0).norm() < 1e-9);
}

#[test]
fn horizontal_momentum_conserved_while_airborne() {
    let cfg = PhysicsConfig::default();
    let specs = vec![floor(0.5, 0.0), sphere(0.5, 1.0, 0.0, 0.9), sphere(0.5, 1.0, 0.0, 0.9)];
    let mut s = state(
        vec![
            BodyState::at_rest(Pose::IDENTITY),
            body(Vec3::new(-1.2, 0.0, 4.0), Vec3::new(0.1, 0.0, 0.0)),
            body(Vec3::new(1.2, 0.05, 4.0), Vec3::new(-0.1, 0.0, 0.0)),
        ],
        DEFAULT_GRAVITY,
    );
    for _ in 0..20 {
        let next = step(&s, &specs, &cfg).unwrap();
        let airborne = next.bodies[1..].iter().all(|b| b.pose.position.z > 0.6);
        if !airborne {
            break;
        }
        let (a, b) = (momentum(&s, &specs), momentum(&next, &specs));
        assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
        s = next;
    }
}

#[test]
fn free_motion_is_uniform() {
    let cfg = PhysicsConfig::default();
    let specs = vec![ObjectSpec::new(Shape::Box { half_extents: Vec3::splat(0.4), subdivision: 1 }, 1.0, 0.5, 0.5, false)];
    let q0 = Quaternion::from_rotation_vector(Vec3::new(0.1, 0.7, -0.4));
    let (v, w) = (Vec3::new(0.03, -0.02, 0.05), Vec3::new(0.0, 0.02, 0.04));
    let mut s = state(
        vec![BodyState { pose: Pose::new(Vec3::new(1.0, 2.0, 3.0), q0), velocity: v, angular_velocity: w }],
        Vec3::ZERO,
    );
    for n in 1..=60 {
        s = step(&s, &specs, &cfg).unwrap();
        let b = s.bodies[0];
        assert_eq!(b.velocity, v);
        assert_eq!(b.angular_velocity, w);
        assert!((b.pose.position - (Vec3::new(1.0, 2.0, 3.0) + v * n as f64)).norm() < 1e-12);
        let expect = Quaternion::from_rotation_vector(w * n as f64) * q0;
        let q = b.pose.orientation;
        let dot = q.w * expect.w + q.x * expect.x + q.y * expect.y + q.z * expect.z;
        assert!(1.0 - dot.abs() < 1e-12);
    }
}

#[test]
fn sphere_at_rest_stays_at_rest() {
    let cfg = PhysicsConfig::default();
    let specs = vec![floor(0.5, 0.0), sphere(0.5, 1.0, 0.4, 0.6)];
    let mut s = state(vec![BodyState::at_rest(Pose::IDENTITY), body(Vec3::new(0.3, 0.3, 0.5), Vec3::ZERO)], DEFAULT_GRAVITY);
    for _ in 0..100 {
        let next = step(&s, &specs, &cfg).unwrap();
        let drift = (next.bodies[1].pose.position - s.bodies[1].pose.position).norm();
        assert!(drift < 1e-6, "drift {drift}");
        s = next;
    }
    assert!(0.5 - s.bodies[1].pose.position.z < 1e-3);
}

#[test]
fn dropped_spheres_do_not_sink() {
    let cfg = PhysicsConfig::default();
    let specs = vec![floor(0.5, 0.0), sphere(0.5, 1.0, 0.4, 0.3), sphere(0.4, 2.0, 0.2, 0.0)];
    let mut s = state(
        vec![
            BodyState::at_rest(Pose::IDENTITY),
            body(Vec3::new(0.0, 0.0, 1.5), Vec3::new(0.01, 0.0, 0.0)),
            body(Vec3::new(2.0, 0.0, 0.9), Vec3::ZERO),
        ],
        DEFAULT_GRAVITY,
    );
    for _ in 0..100 {
        s = step(&s, &specs, &cfg).unwrap();
    }
    for (b, r) in s.bodies[1..].iter().zip([0.5, 0.4]) {
        assert!(r - b.pose.position.z < 1e-3, "sank to {}", b.pose.position.z);
    }
}

#[test]
fn cube_settles_on_floor() {
    let cfg = PhysicsConfig::default();
    let specs = vec![floor(0.5, 0.0), ObjectSpec::new(Shape::Box { half_extents: Vec3::splat(0.4), subdivision: 1 }, 1.0, 0.5, 0.2, false)];
    let mut s = state(
        vec![
            BodyState::at_rest(Pose::IDENTITY),
            BodyState {
                pose: Pose::new(Vec3::new(0.0, 0.0, 1.2), Quaternion::from_rotation_vector(Vec3::new(0.2, 0.1, 0.0))),
                velocity: Vec3::ZERO,
                angular_velocity: Vec3::ZERO,
            },
        ],
        DEFAULT_GRAVITY,
    );
    for _ in 0..300 {
        s = step(&s, &specs, &cfg).unwrap();
    }
    let b = s.bodies[1];
    let lowest = specs[1].mesh.nodes.iter().map(|&p| b.pose.apply(p).z).fold(f64::INFINITY, f64::min);
    assert!(lowest > -1e-3 && lowest < 0.05, "lowest corner {lowest}");
    assert!(b.velocity.norm() < 1e-3);
}

#[test]
fn energy_non_increasing_over_random_scenes() {
    let scene = SceneConfig::default();
    let cfg = PhysicsConfig::default();
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..200 {
        let (specs, mut s) = generate_scene(seed, &scene).unwrap();
        let mut e = mechanical_energy(&s, &specs);
        for _ in 0..64 {
            s = step(&s, &specs, &cfg).unwrap();
            let next = mechanical_energy(&s, &specs);
            worst = worst.max(next - e);
            e = next;
        }
    }
    assert!(worst <= 1e-6, "energy rose by {worst}");
}

#[test]
fn static_objects_never_move() {
    let traj = simulate_trajectory(7, &SceneConfig::default(), &PhysicsConfig::default(), 64).unwrap();
    for f in &traj.frames {
        assert_eq!(f[0], traj.frames[0][0]);
    }
}

#[test]
fn scenes_are_deterministic_and_respect_count_range() {
    let mut cfg = SceneConfig::default();
    let a = generate_scene(42, &cfg).unwrap();
    let b = generate_scene(42, &cfg).unwrap();
    assert_eq!(a, b);
    cfg.min_objects = 2;
    cfg.max_objects = 2;
    for seed in 0..20 {
        let (specs, s) = generate_scene(seed, &cfg).unwrap();
        assert_eq!(specs.len(), 3);
        assert_eq!(s.bodies.len(), 3);
        assert!(specs[0].is_static && specs[1..].iter().all(|o| !o.is_static));
    }
}

#[test]
fn no_initial_interpenetration_over_many_seeds() {
    let cfg = SceneConfig::default();
    for seed in 0..1000 {
        let (specs, s) = generate_scene(seed, &cfg).unwrap();
        let contacts = body_contacts(&s.poses(), &specs, &|_, _| 0.0);
        assert!(contacts.iter().all(|c| c.gap >= 0.0), "seed {seed}: {contacts:?}");
        for (b, o) in s.bodies.iter().zip(&specs).skip(1) {
            let lowest = o.mesh.nodes.iter().map(|&p| b.pose.apply(p).z).fold(f64::INFINITY, f64::min);
            assert!(lowest >= 0.0, "seed {seed}: below floor");
        }
    }
}

#[test]
fn crowded_scene_reports_placement_failure() {
    let cfg = SceneConfig { min_objects: 6, max_objects: 6, spawn_half_width: 0.5, spawn_clearance: [0.0, 0.0], ..SceneConfig::default() };
    assert!(matches!(generate_scene(1, &cfg), Err(SimError::PlacementFailure { .. })));
}

#[test]
fn speed_cap_reports_blowup() {
    let cfg = PhysicsConfig { speed_cap: 0.1, ..PhysicsConfig::default() };
    let specs = vec![sphere(0.5, 1.0, 0.0, 0.5)];
    let s = state(vec![body(Vec3::ZERO, Vec3::new(0.2, 0.0, 0.0))], Vec3::ZERO);
    assert!(matches!(step(&s, &specs, &cfg), Err(SimError::NumericalBlowup { object: 0, .. })));
}

#[test]
fn trajectory_layout_and_determinism() {
    let scene = SceneConfig::default();
    let physics = PhysicsConfig::default();
    let zero = simulate_trajectory(3, &scene, &physics, 0).unwrap();
    assert_eq!(zero.frame_count(), 2);
    let a = simulate_trajectory(3, &scene, &physics, 30).unwrap();
    let b = simulate_trajectory(3, &scene, &physics, 30).unwrap();
    assert_eq!(a.frame_count(), 32);
    assert_eq!(a.to_bytes(), b.to_bytes());
    let (_, s) = generate_scene(3, &scene).unwrap();
    for (k, body) in s.bodies.iter().enumerate() {
        let v = a.frames[1][k].position - a.frames[0][k].position;
        assert!((v - body.velocity).norm() < 1e-15);
    }
    assert_eq!(a.node_positions(5).len(), a.node_count());
}

#[test]
fn trajectory_round_trips_bit_exactly() {
    let t = simulate_trajectory(11, &SceneConfig::default(), &PhysicsConfig::default(), 12).unwrap();
    let bytes = t.to_bytes();
    let back = Trajectory::read(bytes.as_slice()).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.to_bytes(), bytes);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.traj");
    t.save(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(Trajectory::load(&path).unwrap(), t);
}

#[test]
fn trajectory_rejects_future_versions_and_damage() {
    let t = simulate_trajectory(11, &SceneConfig::default(), &PhysicsConfig::default(), 3).unwrap();
    let bytes = t.to_bytes();

    let mut future = bytes.clone();
    future[8..12].copy_from_slice(&99u32.to_le_bytes());
    let err = Trajectory::read(future.as_slice()).unwrap_err().to_string();
    assert!(err.contains("newer"), "{err}");

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(Trajectory::read(bad_magic.as_slice()).is_err());

    for cut in [0, 10, bytes.len() / 2, bytes.len() - 1] {
        assert!(Trajectory::read(&bytes[..cut]).is_err());
    }
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(Trajectory::read(trailing.as_slice()).is_err());
}
