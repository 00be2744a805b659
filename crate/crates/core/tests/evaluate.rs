use hopnet::complex::{build_complex, detect_contacts};
use hopnet::engine::{fit_normalizers, rollout, Dataset, EngineError, RolloutInit};
use hopnet::evaluate::{
    apply_counterfactual, collision_speed_histogram, contact_speeds, evaluate_trajectories, rmse_ori, rmse_pos, Edit,
    EvalError, MetricMode,
};
use hopnet::geometry::{Quaternion, Vec3};
use hopnet::model::{HopNet, ModelConfig};
use hopnet::sim::{
    simulate, simulate_trajectory, BodyState, ObjectSpec, PhysicsConfig, Pose, SceneConfig, Shape, SimState,
    Trajectory, DEFAULT_GRAVITY,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn floor() -> ObjectSpec {
    ObjectSpec::new(Shape::Plane { half_size: 20.0, tiles: 10 }, 0.0, 0.5, 0.0, true)
}

fn sphere(r: f64) -> ObjectSpec {
    ObjectSpec::new(Shape::Sphere { radius: r, subdivision: 1 }, 1.0, 0.3, 0.5, false)
}

fn body(p: Vec3, v: Vec3) -> BodyState {
    BodyState { pose: Pose::new(p, Quaternion::IDENTITY), velocity: v, angular_velocity: Vec3::ZERO }
}

fn quat(rng: &mut ChaCha8Rng) -> Quaternion {
    Quaternion::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        .normalized()
        .unwrap()
}

#[test]
fn rmse_pos_examples() {
    let zero = [Vec3::ZERO, Vec3::ZERO];
    assert_eq!(rmse_pos(&zero, &zero).unwrap(), 0.0);
    let r = rmse_pos(&[Vec3::X, Vec3::ZERO], &zero).unwrap();
    assert!((r - 0.70710678).abs() < 1e-8);
    assert!((r - 0.5f64.sqrt()).abs() < 1e-15);
    assert_eq!(
        rmse_pos(&[Vec3::X], &zero),
        Err(EvalError::LengthMismatch { what: "positions", left: 1, right: 2 })
    );
}

#[test]
fn rmse_pos_matches_one_line_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let k = rng.gen_range(1..8);
        let v = |rng: &mut ChaCha8Rng| Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let a: Vec<Vec3> = (0..k).map(|_| v(&mut rng)).collect();
        let b: Vec<Vec3> = (0..k).map(|_| v(&mut rng)).collect();
        let oracle = (a.iter().zip(&b).map(|(p, q)| (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2)).sum::<f64>() / k as f64).sqrt();
        assert!((rmse_pos(&a, &b).unwrap() - oracle).abs() < 1e-12);
        let shift = v(&mut rng);
        let (sa, sb): (Vec<_>, Vec<_>) = (a.iter().map(|&p| p + shift).collect(), b.iter().map(|&p| p + shift).collect());
        assert!((rmse_pos(&sa, &sb).unwrap() - oracle).abs() < 1e-12);
    }
}

#[test]
fn rmse_ori_examples() {
    let q = Quaternion::from_axis_angle(Vec3::Z, std::f64::consts::FRAC_PI_2);
    let id = Quaternion::IDENTITY;
    assert!((rmse_ori(&[q], &[id], MetricMode::Paper).unwrap() - 9.48683298).abs() < 1e-6);
    assert!((rmse_ori(&[q], &[id], MetricMode::Squared).unwrap() - 90.0).abs() < 1e-9);
    assert_eq!(rmse_ori(&[q, id], &[q, id], MetricMode::Paper).unwrap(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let a = quat(&mut rng);
        assert!(rmse_ori(&[a], &[a.scale(-1.0)], MetricMode::Paper).unwrap() < 1e-6);
        assert!(rmse_ori(&[a], &[a.scale(-1.0)], MetricMode::Squared).unwrap() < 1e-6);
    }
    assert!(matches!(rmse_ori(&[], &[], MetricMode::Paper), Err(EvalError::EmptyDynamicSet)));
}

proptest! {
    #[test]
    fn rmse_ori_right_invariant(seed in 0u64..10_000, k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<Quaternion> = (0..k).map(|_| quat(&mut rng)).collect();
        let b: Vec<Quaternion> = (0..k).map(|_| quat(&mut rng)).collect();
        let r = quat(&mut rng);
        for mode in [MetricMode::Paper, MetricMode::Squared] {
            let base = rmse_ori(&a, &b, mode).unwrap();
            let ar: Vec<_> = a.iter().map(|&q| q * r).collect();
            let br: Vec<_> = b.iter().map(|&q| q * r).collect();
            prop_assert!((rmse_ori(&ar, &br, mode).unwrap() - base).abs() < 1e-6);
        }
    }
}

fn scene_trajectory(seed: u64, steps: usize) -> Trajectory {
    simulate_trajectory(seed, &SceneConfig::default(), &PhysicsConfig::default(), steps).unwrap()
}

#[test]
fn trajectory_metrics_identical_and_clamped() {
    let t = scene_trajectory(4, 10);
    let report = evaluate_trajectories(&[(&t, &t)], &[5, 25], MetricMode::Paper, "d", "c").unwrap();
    assert_eq!(report.available_horizon, 10);
    assert_eq!((report.horizons[0].horizon, report.horizons[0].clamped), (5, false));
    assert_eq!((report.horizons[1].horizon, report.horizons[1].clamped), (10, true));
    for h in &report.horizons {
        assert_eq!((h.rmse_pos, h.rmse_ori), (0.0, 0.0));
        assert_eq!(h.objects.len(), t.dynamic_objects().len());
    }

    let mut moved = t.clone();
    let k = t.dynamic_objects()[0];
    moved.frames[6][k].position += Vec3::new(0.0, 0.3, 0.4);
    let report = evaluate_trajectories(&[(&moved, &t)], &[5], MetricMode::Paper, "d", "c").unwrap();
    let n = t.dynamic_objects().len() as f64;
    assert!((report.horizons[0].rmse_pos - (0.25 / n).sqrt()).abs() < 1e-12);
    assert!((report.horizons[0].objects[0].position - 0.5).abs() < 1e-12);

    let mut fewer = t.clone();
    fewer.objects.pop();
    fewer.frames.iter_mut().for_each(|f| {
        f.pop();
    });
    assert!(matches!(
        evaluate_trajectories(&[(&fewer, &t)], &[5], MetricMode::Paper, "d", "c"),
        Err(EvalError::LengthMismatch { what: "objects", .. })
    ));
}

#[test]
fn resting_contacts_fill_the_lowest_bin() {
    let objects = vec![floor(), sphere(0.5)];
    let init = SimState { bodies: vec![BodyState::at_rest(Pose::IDENTITY), body(Vec3::new(0.0, 0.0, 0.5), Vec3::ZERO)], gravity: DEFAULT_GRAVITY, step: 0 };
    let t = simulate(0, objects, init, &PhysicsConfig::default(), 10).unwrap();
    let cc = build_complex(&t.meshes()).unwrap();
    let frames = t.all_node_positions();
    let h = collision_speed_histogram([(&cc, frames.as_slice())], 0.25);
    assert!(h.total() > 0);
    assert_eq!(h.counts[0], h.total());
}

#[test]
fn head_on_contacts_land_in_the_closing_speed_bin() {
    let objects = vec![sphere(0.5), sphere(0.5)];
    let init = SimState {
        bodies: vec![body(Vec3::new(-1.5, 0.0, 0.0), Vec3::new(0.1, 0.0, 0.0)), body(Vec3::new(1.5, 0.0, 0.0), Vec3::new(-0.1, 0.0, 0.0))],
        gravity: Vec3::ZERO,
        step: 0,
    };
    let t = simulate(0, objects, init, &PhysicsConfig::default(), 20).unwrap();
    let cc = build_complex(&t.meshes()).unwrap();
    let frames = t.all_node_positions();
    let first = (1..frames.len()).find(|&f| detect_contacts(&cc, &frames[f], 0.25).contacts().len() > 0).unwrap();
    let at_first = contact_speeds(&detect_contacts(&cc, &frames[first], 0.25), &frames[first - 1], &frames[first]);
    let h = collision_speed_histogram([(&cc, &frames[first - 1..=first])], 0.25);
    assert_eq!(h.total() as usize, at_first.len());
    assert_eq!(h.counts.len(), 21);
    assert_eq!(h.counts[20], h.total());

    let whole = collision_speed_histogram([(&cc, frames.as_slice())], 0.25);
    let pairs: usize = (1..frames.len()).map(|f| detect_contacts(&cc, &frames[f], 0.25).contacts().len()).sum();
    assert_eq!(whole.total() as usize, pairs);
}

fn separated_scene() -> (Vec<ObjectSpec>, SimState) {
    let objects = vec![floor(), sphere(0.5), sphere(0.4), sphere(0.6)];
    let state = SimState {
        bodies: vec![
            BodyState::at_rest(Pose::IDENTITY),
            body(Vec3::new(-4.0, 0.0, 0.9), Vec3::new(-0.05, 0.01, 0.0)),
            body(Vec3::new(0.0, 0.0, 1.5), Vec3::new(0.0, 0.0, 0.0)),
            body(Vec3::new(4.0, 0.5, 0.6), Vec3::new(0.04, 0.0, 0.02)),
        ],
        gravity: DEFAULT_GRAVITY,
        step: 0,
    };
    (objects, state)
}

#[test]
fn counterfactual_edit_rules() {
    let (objects, state) = separated_scene();
    let t = simulate(0, objects, state, &PhysicsConfig::default(), 2).unwrap();
    let init = RolloutInit::from_trajectory(&t).unwrap();
    assert_eq!(apply_counterfactual(&init, &Edit::RemoveObject(9)), Err(EvalError::UnknownObject(9)));
    assert_eq!(apply_counterfactual(&init, &Edit::RemoveObject(0)), Err(EvalError::EditOnStatic(0)));
    assert!(matches!(apply_counterfactual(&init, &Edit::SetMass(1, -1.0)), Err(EvalError::InvalidEdit(_))));

    let v = Vec3::new(0.03, -0.02, 0.01);
    let e = apply_counterfactual(&init, &Edit::SetVelocity(2, v)).unwrap();
    assert!((e.current[2].position - e.previous[2].position - v).norm() < 1e-15);
    assert_eq!(e.current, init.current);

    let q = Quaternion::from_axis_angle(Vec3::Y, 0.4);
    let e = apply_counterfactual(&init, &Edit::SetPose(3, Vec3::new(1.0, 1.0, 2.0), q)).unwrap();
    let old = init.current[3].position - init.previous[3].position;
    assert!((e.current[3].position - e.previous[3].position - old).norm() < 1e-15);
    assert_eq!(e.current[3].orientation, q);

    let e = apply_counterfactual(&init, &Edit::SetMass(1, 3.5)).unwrap();
    assert_eq!(e.objects[1].mass, 3.5);

    let removed = apply_counterfactual(&init, &Edit::RemoveObject(2)).unwrap();
    assert_eq!(removed.ids, vec![0, 1, 3]);
    let again = apply_counterfactual(&removed, &Edit::SetMass(3, 2.0)).unwrap();
    assert_eq!(again.objects[2].mass, 2.0);
    assert_eq!(apply_counterfactual(&removed, &Edit::RemoveObject(2)), Err(EvalError::UnknownObject(2)));
}

#[test]
fn disjoint_edits_commute() {
    let (objects, state) = separated_scene();
    let t = simulate(0, objects, state, &PhysicsConfig::default(), 2).unwrap();
    let init = RolloutInit::from_trajectory(&t).unwrap();
    let edits = [
        Edit::RemoveObject(1),
        Edit::SetMass(2, 0.7),
        Edit::SetVelocity(3, Vec3::new(0.1, 0.0, -0.02)),
        Edit::SetPose(2, Vec3::new(0.5, 0.5, 2.0), Quaternion::from_axis_angle(Vec3::X, 1.0)),
        Edit::RemoveObject(3),
    ];
    for a in &edits {
        for b in &edits {
            if a.object() == b.object() {
                continue;
            }
            let ab = apply_counterfactual(&apply_counterfactual(&init, a).unwrap(), b).unwrap();
            let ba = apply_counterfactual(&apply_counterfactual(&init, b).unwrap(), a).unwrap();
            assert_eq!(ab, ba, "{a:?} / {b:?}");
        }
    }
}

#[test]
fn removing_the_last_dynamic_object_surfaces_cleanly() {
    let objects = vec![floor(), sphere(0.5)];
    let state = SimState { bodies: vec![BodyState::at_rest(Pose::IDENTITY), body(Vec3::new(0.0, 0.0, 2.0), Vec3::ZERO)], gravity: DEFAULT_GRAVITY, step: 0 };
    let t = simulate(0, objects, state, &PhysicsConfig::default(), 2).unwrap();
    let init = apply_counterfactual(&RolloutInit::from_trajectory(&t).unwrap(), &Edit::RemoveObject(1)).unwrap();
    let model = HopNet::new(ModelConfig { hidden: 8, ..ModelConfig::default() }, 0);
    assert!(matches!(rollout(&model, &init, 3), Err(EngineError::EmptyDynamicSet)));
}

#[test]
fn removing_a_non_interacting_object_is_local() {
    let (objects, state) = separated_scene();
    let physics = PhysicsConfig::default();
    let full = simulate(0, objects.clone(), state.clone(), &physics, 60).unwrap();

    let mut fewer_objects = objects.clone();
    let mut fewer_state = state.clone();
    fewer_objects.remove(3);
    fewer_state.bodies.remove(3);
    let fewer = simulate(0, fewer_objects, fewer_state, &physics, 60).unwrap();
    for (a, b) in full.frames.iter().zip(&fewer.frames) {
        assert_eq!(&a[..3], &b[..]);
    }

    let mut model = HopNet::new(ModelConfig { hidden: 16, ..ModelConfig::default() }, 2);
    fit_normalizers(&mut model, &Dataset::new(&[full.clone()]).unwrap(), 50).unwrap();
    let init = RolloutInit::from_trajectory(&full).unwrap();
    let edited = apply_counterfactual(&init, &Edit::RemoveObject(3)).unwrap();
    let a = rollout(&model, &init, 40).unwrap();
    let b = rollout(&model, &edited, 40).unwrap();
    for (pa, pb) in a.poses.iter().zip(&b.poses) {
        for k in 0..3 {
            assert!((pa[k].position - pb[k].position).norm() < 1e-6);
        }
    }
}
