use hopnet::complex::build_complex;
use hopnet::engine::{
    compute_targets, evaluate_loss, fit_normalizers, inject_noise, loss, rollout, sample_loss_and_grad, train,
    Dataset, EngineError, Predictor, RolloutInit, SampleId, TrainConfig, Trainer,
};
use hopnet::features::{FrameHistory, PhysicalParams};
use hopnet::geometry::{shape_match, Vec3};
use hopnet::model::{HopNet, ModelConfig};
use hopnet::sim::{simulate_trajectory, PhysicsConfig, SceneConfig, Trajectory};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn two_sphere_scene() -> SceneConfig {
    SceneConfig { min_objects: 2, max_objects: 2, sphere_probability: 1.0, ..SceneConfig::default() }
}

fn trajectories(n: u64, steps: usize) -> Vec<Trajectory> {
    (0..n).map(|s| simulate_trajectory(s, &two_sphere_scene(), &PhysicsConfig::default(), steps).unwrap()).collect()
}

fn small_model(seed: u64) -> HopNet {
    HopNet::new(ModelConfig { hidden: 16, ..ModelConfig::default() }, seed)
}

fn quiet(steps: usize) -> TrainConfig {
    TrainConfig { steps, noise_sigma: 0.0, log_every: 10, ..TrainConfig::default() }
}

#[test]
fn targets_follow_second_difference() {
    let traj = &trajectories(1, 6)[0];
    let cc = build_complex(&traj.meshes()).unwrap();
    let frames = traj.all_node_positions();
    let (nodes, objects) = compute_targets(&frames, &cc, 3).unwrap();
    for (k, o) in cc.objects().iter().enumerate() {
        for i in o.nodes.clone() {
            let expect = if o.is_static { Vec3::ZERO } else { frames[4][i] - frames[3][i] * 2.0 + frames[2][i] };
            for c in 0..3 {
                assert_eq!(nodes[[i, c]], expect.to_array()[c]);
            }
        }
        if o.is_static {
            assert!(objects.row(k).iter().all(|&v| v == 0.0));
        }
    }
    assert!(matches!(compute_targets(&frames, &cc, 0), Err(EngineError::OutOfRange { .. })));
    assert!(matches!(compute_targets(&frames, &cc, frames.len() - 1), Err(EngineError::OutOfRange { .. })));
}

#[test]
fn targets_of_hand_frames() {
    let traj = &trajectories(1, 1)[0];
    let cc = build_complex(&traj.meshes()).unwrap();
    let n = cc.node_count();
    let axis = |x: f64| vec![Vec3::new(x, 0.0, 0.0); n];
    let (nodes, _) = compute_targets(&[axis(0.0), axis(1.0), axis(2.5)], &cc, 1).unwrap();
    let dynamic = cc.objects().iter().find(|o| !o.is_static).unwrap().nodes.start;
    assert_eq!(nodes[[dynamic, 0]], 0.5);

    let v = Vec3::new(0.25, -0.125, 0.5);
    let dyadic = |x: f64| (x * 1024.0).round() / 1024.0;
    let base: Vec<Vec3> = traj.node_positions(1).iter().map(|p| Vec3::new(dyadic(p.x), dyadic(p.y), dyadic(p.z))).collect();
    let frames: Vec<Vec<Vec3>> = (0..3).map(|t| base.iter().map(|&p| p + v * t as f64).collect()).collect();
    let (nodes, objects) = compute_targets(&frames, &cc, 1).unwrap();
    assert!(nodes.iter().all(|&a| a == 0.0));
    assert!(objects.iter().all(|&a| a.abs() < 1e-12));
}

#[test]
fn targets_ignore_global_translation() {
    let traj = &trajectories(1, 4)[0];
    let cc = build_complex(&traj.meshes()).unwrap();
    let frames = traj.all_node_positions();
    let offset = Vec3::new(17.0, -3.0, 5.0);
    let moved: Vec<Vec<Vec3>> = frames.iter().map(|f| f.iter().map(|&p| p + offset).collect()).collect();
    let (a, ao) = compute_targets(&frames, &cc, 2).unwrap();
    let (b, bo) = compute_targets(&moved, &cc, 2).unwrap();
    assert!((&a - &b).iter().chain((&ao - &bo).iter()).all(|d| d.abs() < 1e-12));
}

#[test]
fn loss_examples() {
    let t_node = Array2::from_shape_fn((5, 3), |(i, c)| i as f64 - c as f64 * 0.5);
    let t_obj = Array2::from_shape_fn((2, 3), |(i, c)| (i * c) as f64 * 0.1);
    let nmask = [true, true, false, true, true];
    let omask = [true, false];
    let (zero, gn, go) = loss(&t_node, &t_obj, &t_node, &t_obj, &nmask, &omask, 1.0);
    assert_eq!(zero.total, 0.0);
    assert!(gn.iter().chain(go.iter()).all(|&g| g == 0.0));

    let (off, _, _) = loss(&(&t_node + 1.0), &(&t_obj + 1.0), &t_node, &t_obj, &nmask, &omask, 0.7);
    assert!((off.total - 1.7).abs() < 1e-15);

    let p_node = t_node.mapv(|v| v * 1.3 - 0.2);
    let p_obj = t_obj.mapv(|v| v * 0.4 + 0.9);
    let (full, _, _) = loss(&p_node, &p_obj, &t_node, &t_obj, &nmask, &omask, 1.0);
    let (half, _, _) = loss(&p_node, &p_obj, &t_node, &t_obj, &nmask, &omask, 0.5);
    assert_eq!(half.object, full.object);
    assert!((half.total - (full.node + 0.5 * full.object)).abs() < 1e-15);

    // Masked rows do not contribute.
    let mut other = p_node.clone();
    other[[2, 1]] += 100.0;
    assert_eq!(loss(&other, &p_obj, &t_node, &t_obj, &nmask, &omask, 1.0).0, full);
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let t_node = Array2::from_shape_fn((4, 3), |(i, c)| (i as f64 * 0.3 - c as f64).sin());
    let t_obj = Array2::from_shape_fn((2, 3), |(i, c)| (i as f64 + c as f64 * 0.7).cos());
    let p_node = t_node.mapv(|v| v * 0.5 + 0.1);
    let p_obj = t_obj.mapv(|v| v - 0.3);
    let (nm, om) = ([true, false, true, true], [true, true]);
    let (_, gn, go) = loss(&p_node, &p_obj, &t_node, &t_obj, &nm, &om, 0.8);
    let h = 1e-6;
    for i in 0..4 {
        for c in 0..3 {
            let (mut a, mut b) = (p_node.clone(), p_node.clone());
            a[[i, c]] += h;
            b[[i, c]] -= h;
            let fd = (loss(&a, &p_obj, &t_node, &t_obj, &nm, &om, 0.8).0.total
                - loss(&b, &p_obj, &t_node, &t_obj, &nm, &om, 0.8).0.total)
                / (2.0 * h);
            assert!((fd - gn[[i, c]]).abs() < 1e-8);
        }
    }
    for i in 0..2 {
        for c in 0..3 {
            let (mut a, mut b) = (p_obj.clone(), p_obj.clone());
            a[[i, c]] += h;
            b[[i, c]] -= h;
            let fd = (loss(&p_node, &a, &t_node, &t_obj, &nm, &om, 0.8).0.total
                - loss(&p_node, &b, &t_node, &t_obj, &nm, &om, 0.8).0.total)
                / (2.0 * h);
            assert!((fd - go[[i, c]]).abs() < 1e-8);
        }
    }
}

#[test]
fn noise_is_a_random_walk_and_targets_still_hit_the_next_frame() {
    let trajs = trajectories(1, 4);
    let ds = Dataset::new(&trajs).unwrap();
    let sample = ds.sample(SampleId { episode: 0, t: 2 }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert_eq!(inject_noise(&sample, 0.0, &mut rng), sample);

    let a = inject_noise(&sample, 1e-3, &mut ChaCha8Rng::seed_from_u64(9));
    let b = inject_noise(&sample, 1e-3, &mut ChaCha8Rng::seed_from_u64(9));
    assert_eq!(a, b);
    let next = &ds.episodes[0].frames[3];
    for i in 0..next.len() {
        let acc = Vec3::new(a.node_acc[[i, 0]], a.node_acc[[i, 1]], a.node_acc[[i, 2]]);
        let landed = acc + a.history.current[i] * 2.0 - a.history.previous[i];
        assert!((landed - next[i]).norm() < 1e-12);
        if !a.node_mask[i] {
            assert_eq!(a.history.current[i], sample.history.current[i]);
        }
    }
}

#[test]
fn noise_variance_matches_random_walk() {
    let trajs = trajectories(1, 2);
    let ds = Dataset::new(&trajs).unwrap();
    let sample = ds.sample(SampleId { episode: 0, t: 1 }).unwrap();
    let i = sample.node_mask.iter().position(|&m| m).unwrap();
    let sigma = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut s_prev, mut s_cur) = ([0.0; 3], [0.0; 3]);
    let draws = 100_000;
    for _ in 0..draws {
        let noisy = inject_noise(&sample, sigma, &mut rng);
        let (dp, dc) = (noisy.history.previous[i] - sample.history.previous[i], noisy.history.current[i] - sample.history.current[i]);
        for c in 0..3 {
            s_prev[c] += dp.to_array()[c].powi(2);
            s_cur[c] += dc.to_array()[c].powi(2);
        }
    }
    for c in 0..3 {
        let sp = (s_prev[c] / draws as f64).sqrt();
        let sc = (s_cur[c] / draws as f64).sqrt();
        assert!((sp / sigma - 1.0).abs() < 0.05, "t-1 std {sp}");
        assert!((sc / (sigma * 2f64.sqrt()) - 1.0).abs() < 0.05, "t std {sc}");
    }
}

fn single_sample(trajs: &[Trajectory], t: usize) -> Dataset {
    let mut ds = Dataset::new(trajs).unwrap();
    ds.samples = vec![SampleId { episode: 0, t }];
    ds
}

#[test]
fn overfits_one_sample() {
    let trajs = trajectories(1, 20);
    let ds = single_sample(&trajs, 10);
    let mut model = small_model(3);
    fit_normalizers(&mut model, &Dataset::new(&trajs).unwrap(), 100).unwrap();
    let before = evaluate_loss(&model, &ds, 1.0).unwrap();
    let (model, log) = train(model, &ds, &TrainConfig { lr_end: 1e-3, ..quiet(500) }).unwrap();
    let after = evaluate_loss(&model, &ds, 1.0).unwrap();
    assert!(after < 0.01 * before, "{before} -> {after}");
    assert_eq!(log.steps.last().unwrap().step, 500);
}

#[test]
fn training_is_deterministic() {
    let trajs = trajectories(2, 8);
    let ds = Dataset::new(&trajs).unwrap();
    for batch_size in [1, 3] {
        let cfg = TrainConfig { batch_size, noise_sigma: 1e-3, ..quiet(15) };
        let (a, la) = train(small_model(1), &ds, &cfg).unwrap();
        let (b, lb) = train(small_model(1), &ds, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.normalizers, b.normalizers);
        let losses = |l: &hopnet::engine::TrainLog| l.steps.iter().map(|r| r.loss).collect::<Vec<_>>();
        assert_eq!(losses(&la), losses(&lb));
    }
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let trajs = trajectories(1, 6);
    let ds = Dataset::new(&trajs).unwrap();
    let start = small_model(2);
    let (model, _) = train(start.clone(), &ds, &TrainConfig { lr_start: 0.0, lr_end: 0.0, ..quiet(5) }).unwrap();
    assert_eq!(model.params, start.params);
}

#[test]
fn loss_on_a_fixed_frame_drops_within_fifty_steps() {
    let trajs = trajectories(1, 12);
    let ds = single_sample(&trajs, 6);
    let mut decreasing = 0;
    for seed in 0..10 {
        let mut model = small_model(seed);
        fit_normalizers(&mut model, &Dataset::new(&trajs).unwrap(), 100).unwrap();
        let before = evaluate_loss(&model, &ds, 1.0).unwrap();
        let (model, _) = train(model, &ds, &quiet(50)).unwrap();
        if evaluate_loss(&model, &ds, 1.0).unwrap() <= before {
            decreasing += 1;
        }
    }
    assert!(decreasing >= 10, "{decreasing}/10 runs decreased");
}

#[test]
fn non_finite_parameters_abort_training() {
    let trajs = trajectories(1, 4);
    let ds = Dataset::new(&trajs).unwrap();
    let mut model = small_model(0);
    fit_normalizers(&mut model, &ds, 10).unwrap();
    model.params.tensors[0][[0, 0]] = f64::NAN;
    let err = train(model, &ds, &quiet(3)).unwrap_err();
    assert!(matches!(err, EngineError::NonFiniteLoss { step: 1, .. }), "{err}");
}

#[test]
fn checkpoint_cadence_and_log_format() {
    let trajs = trajectories(1, 6);
    let ds = Dataset::new(&trajs).unwrap();
    let mut trainer = Trainer::new(small_model(0), &ds, TrainConfig { checkpoint_every: 5, ..quiet(12) }).unwrap();
    let mut at = Vec::new();
    trainer.run(|step, _| {
        at.push(step);
        Ok(())
    })
    .unwrap();
    assert_eq!(at, vec![5, 10, 12]);
    let (_, log) = trainer.finish();
    let text = log.to_text();
    assert!(text.starts_with("# hopnet training log v1\nskipped_frames=0\nstep=1 loss="));
    assert!(text.lines().any(|l| l.starts_with("step=12 ")));
    assert!(text.lines().any(|l| l.starts_with("epoch=0 mean_loss=")));
    assert_eq!(log.epochs.iter().map(|e| e.samples).sum::<usize>(), 12);
}

#[test]
fn slow_collision_mask_threshold_zero_keeps_everything() {
    let trajs = trajectories(2, 30);
    let ds = Dataset::new(&trajs).unwrap();
    let n = ds.len();
    let kept = ds.clone().mask_slow_collisions(0.0, 0.25);
    assert_eq!((kept.len(), kept.skipped), (n, 0));
    let masked = ds.mask_slow_collisions(10.0, 0.25);
    assert_eq!(masked.len() + masked.skipped, n);
    assert!(masked.skipped > 0);
}

#[test]
fn sample_gradient_is_finite_and_nonzero() {
    let trajs = trajectories(1, 6);
    let ds = Dataset::new(&trajs).unwrap();
    let mut model = small_model(4);
    fit_normalizers(&mut model, &ds, 10).unwrap();
    let (terms, grads) = sample_loss_and_grad(&model, &ds, &ds.sample(ds.samples[2]).unwrap(), 1.0).unwrap();
    assert!(terms.total > 0.0 && grads.is_finite() && grads.norm() > 0.0);
}

struct Oracle {
    frames: Vec<Vec<Vec3>>,
    step: std::cell::Cell<usize>,
}

impl Predictor for Oracle {
    fn contact_radius(&self) -> f64 {
        0.25
    }
    fn predict(
        &self,
        history: &FrameHistory,
        _: &hopnet::complex::CombinatorialComplex,
        _: &[PhysicalParams],
    ) -> Result<Array2<f64>, EngineError> {
        let t = self.step.get() + 1;
        self.step.set(t);
        let next = &self.frames[t + 1];
        Ok(Array2::from_shape_fn((next.len(), 3), |(i, c)| {
            (next[i] - history.current[i] * 2.0 + history.previous[i]).to_array()[c]
        }))
    }
}

#[test]
fn ground_truth_accelerations_reproduce_the_trajectory() {
    let traj = &trajectories(1, 30)[0];
    let init = RolloutInit::from_trajectory(traj).unwrap();
    let oracle = Oracle { frames: traj.all_node_positions(), step: 0.into() };
    let r = rollout(&oracle, &init, 30).unwrap();
    for (s, poses) in r.poses.iter().enumerate() {
        for (p, t) in poses.iter().zip(&traj.frames[s + 2]) {
            assert!((p.position - t.position).norm() < 1e-9, "step {s}");
            assert!(1.0 - p.orientation.dot(t.orientation).abs() < 1e-9);
        }
    }
    assert!(r.residuals.iter().flatten().all(|&x| (0.0..1e-9).contains(&x)));
}

fn zero_output(mut model: HopNet) -> HopNet {
    for (name, t) in model.params.names.iter().zip(model.params.tensors.iter_mut()) {
        if name.starts_with("decoder_0.") {
            t.fill(0.0);
        }
    }
    model
}

#[test]
fn zero_model_extrapolates_inertially() {
    let traj = &trajectories(1, 3)[0];
    let init = RolloutInit::from_trajectory(traj).unwrap();
    let model = zero_output(small_model(0));
    let r = rollout(&model, &init, 5).unwrap();
    let reference = traj.node_positions(0);
    let mut prev = reference.clone();
    let mut cur = traj.node_positions(1);
    let cc = build_complex(&traj.meshes()).unwrap();
    for nodes in &r.nodes {
        // Zero acceleration extrapolates inertially; rigidity is then restored
        // by the least-squares fit of the reference shape.
        let inertial: Vec<Vec3> = cur.iter().zip(&prev).map(|(&c, &p)| c * 2.0 - p).collect();
        for o in cc.objects() {
            let r = o.nodes.clone();
            let fit = shape_match(&reference[r.clone()], &inertial[r.clone()], &vec![1.0; r.len()]).unwrap();
            for i in r {
                assert!((nodes[i] - fit.apply(reference[i])).norm() < 1e-9);
                assert!((nodes[i] - inertial[i]).norm() < 1e-2);
            }
        }
        prev = std::mem::replace(&mut cur, nodes.clone());
    }
}

#[test]
fn rollouts_are_rigid_normalized_and_causal() {
    let trajs = trajectories(2, 12);
    let ds = Dataset::new(&trajs).unwrap();
    let (model, _) = train(small_model(5), &ds, &quiet(20)).unwrap();
    let init = RolloutInit::from_trajectory(&trajs[0]).unwrap();
    let r = rollout(&model, &init, 12).unwrap();
    assert_eq!(r.poses.len(), 12);
    for nodes in &r.nodes {
        let mut start = 0;
        for o in &init.objects {
            let (canon, n) = (&o.mesh.nodes, o.mesh.nodes.len());
            for a in 0..n {
                for b in (a + 1..n).step_by(7) {
                    let d = (nodes[start + a] - nodes[start + b]).norm() - (canon[a] - canon[b]).norm();
                    assert!(d.abs() < 1e-9);
                }
            }
            start += n;
        }
    }
    for p in r.poses.iter().flatten() {
        assert!((p.orientation.norm() - 1.0).abs() < 1e-9);
    }
    // Only the first two frames are ever read.
    let mut truncated = trajs[0].clone();
    truncated.frames.truncate(2);
    assert_eq!(rollout(&model, &RolloutInit::from_trajectory(&truncated).unwrap(), 12).unwrap(), r);
    assert_eq!(r.to_trajectory(&init).frame_count(), 14);
    assert_eq!(rollout(&model, &init, 1).unwrap().to_trajectory(&init).frame_count(), 3);

    let loaded = HopNet::read_checkpoint(model_bytes(&model).as_slice()).unwrap();
    assert_eq!(rollout(&loaded, &init, 12).unwrap(), r);
}

fn model_bytes(model: &HopNet) -> Vec<u8> {
    let mut b = Vec::new();
    model.write_checkpoint(&mut b).unwrap();
    b
}

#[test]
fn rollout_rejects_degenerate_requests() {
    let traj = &trajectories(1, 2)[0];
    let mut init = RolloutInit::from_trajectory(traj).unwrap();
    let model = small_model(0);
    assert!(matches!(rollout(&model, &init, 0), Err(EngineError::InvalidConfig(_))));
    init.objects.truncate(1);
    init.previous.truncate(1);
    init.current.truncate(1);
    init.ids.truncate(1);
    assert!(matches!(rollout(&model, &init, 1), Err(EngineError::EmptyDynamicSet)));
}
