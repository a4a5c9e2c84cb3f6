use pex_core::estimation::EstimatorState;
use pex_core::model::{BanditInstance, ConstraintSpec, EnvironmentSpec};
use pex_core::presets::preset;
use pex_core::samplers::{run, AlgorithmId, SamplerConfig};
use pex_core::polytope::dot;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(name: &str, delta: f64) -> BanditInstance {
    BanditInstance::build(&preset(name).unwrap().environment, 0.01, delta).unwrap()
}

/// Three arms, `π₁ ≤ 0.6`; non-degenerate optimum `(0.6, 0.4, 0)`.
fn small() -> BanditInstance {
    let env = EnvironmentSpec {
        means: vec![1.0, 0.5, 0.0],
        sigma2: 1.0,
        constraints: vec![ConstraintSpec {
            coeffs: vec![1.0, 0.0, 0.0],
            rhs: 0.6,
        }],
        cost_noise_sd: 0.1,
        reward_noise_sd: None,
    };
    BanditInstance::build(&env, 0.01, 0.1).unwrap()
}

fn noiseless_setup1(delta: f64) -> BanditInstance {
    let mut env = preset("setup1-hard").unwrap().environment;
    env.cost_noise_sd = 0.0;
    env.reward_noise_sd = Some(0.0);
    BanditInstance::build(&env, 0.01, delta).unwrap()
}

#[test]
fn noiseless_run_recommends_the_optimum() {
    let inst = noiseless_setup1(0.1);
    let rec = run(&inst, AlgorithmId::Lats, 0, &SamplerConfig::default()).unwrap();
    assert!(!rec.censored);
    assert!(rec.correct && rec.feasible);
    let want = [0.5, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0];
    for (x, y) in rec.recommendation.weights().iter().zip(want) {
        assert!((x - y).abs() < 1e-9, "{:?}", rec.recommendation);
    }
}

#[test]
fn cap_at_k_is_censored() {
    let inst = instance("setup1-hard", 0.01);
    for alg in AlgorithmId::ALL {
        let cfg = SamplerConfig {
            horizon_cap: 7,
            ..SamplerConfig::default()
        };
        let rec = run(&inst, alg, 3, &cfg).unwrap();
        assert!(rec.censored, "{alg}");
        assert_eq!(rec.tau, 7);
        assert!(rec.final_glr <= rec.final_threshold);
    }
}

#[test]
fn every_algorithm_tracks_within_bound() {
    let inst = instance("setup2-hard", 0.1);
    let cfg = SamplerConfig {
        horizon_cap: 400,
        ..SamplerConfig::default()
    };
    for alg in AlgorithmId::ALL {
        let rec = run(&inst, alg, 11, &cfg).unwrap();
        assert!(rec.tracking_ok(), "{alg}: ratio {}", rec.max_tracking_ratio);
        assert!(rec.tau <= 400);
        let w = rec.recommendation.weights();
        assert!(w.iter().all(|x| *x >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn uniform_without_signal_runs_to_the_cap() {
    let env = EnvironmentSpec {
        means: vec![0.5; 4],
        sigma2: 1.0,
        constraints: vec![ConstraintSpec {
            coeffs: vec![1.0, 0.0, 0.0, 0.0],
            rhs: 0.9,
        }],
        cost_noise_sd: 0.1,
        reward_noise_sd: Some(0.0),
    };
    let inst = BanditInstance::build(&env, 0.0, 0.1).unwrap();
    let cfg = SamplerConfig {
        horizon_cap: 400,
        ..SamplerConfig::default()
    };
    let rec = run(&inst, AlgorithmId::Uniform, 0, &cfg).unwrap();
    assert!(rec.censored);
    assert_eq!(rec.tau, 400);
    assert!(rec.tracking_ok());
}

#[test]
fn runs_are_deterministic_per_seed() {
    let inst = small();
    let cfg = SamplerConfig::default();
    for alg in [AlgorithmId::Lagex, AlgorithmId::Ptns] {
        let a = run(&inst, alg, 5, &cfg).unwrap();
        let b = run(&inst, alg, 5, &cfg).unwrap();
        assert_eq!(a.tau, b.tau);
        assert_eq!(a.recommendation, b.recommendation);
        assert_eq!(a.cumulative_violation.to_bits(), b.cumulative_violation.to_bits());
        assert_eq!(a.final_glr.to_bits(), b.final_glr.to_bits());
    }
    let a = run(&inst, AlgorithmId::Uniform, 1, &cfg).unwrap();
    let b = run(&inst, AlgorithmId::Uniform, 2, &cfg).unwrap();
    assert!(a.tau != b.tau || a.final_glr != b.final_glr);
}

#[test]
fn stopped_runs_cleared_the_threshold() {
    let inst = small();
    for seed in 0..4 {
        for alg in [AlgorithmId::Lats, AlgorithmId::Lagex, AlgorithmId::Uniform, AlgorithmId::CgeWlag] {
            let rec = run(&inst, alg, seed, &SamplerConfig::default()).unwrap();
            assert!(!rec.censored);
            assert!(rec.final_glr > rec.final_threshold);
            if rec.correct {
                assert!(rec.feasible, "{alg} seed {seed}");
            }
            assert!(rec.cumulative_violation >= 0.0);
        }
    }
}

#[test]
fn violation_accumulates_monotonically() {
    let inst = instance("setup2-hard", 0.1);
    let mut last = 0.0;
    for cap in [20, 60, 150, 300] {
        let cfg = SamplerConfig {
            horizon_cap: cap,
            ..SamplerConfig::default()
        };
        let rec = run(&inst, AlgorithmId::Uniform, 9, &cfg).unwrap();
        if rec.censored {
            assert!(rec.cumulative_violation >= last - 1e-12);
            last = rec.cumulative_violation;
        }
    }
}

#[test]
fn known_constraints_keep_allocations_feasible() {
    let inst = small();
    for alg in [AlgorithmId::Ctns, AlgorithmId::Cge] {
        let rec = run(&inst, alg, 4, &SamplerConfig::default()).unwrap();
        assert!(
            rec.cumulative_violation <= 1e-7 * rec.tau as f64,
            "{alg}: {}",
            rec.cumulative_violation
        );
    }
}

#[test]
fn trace_rows_follow_the_stride() {
    let inst = small();
    let cfg = SamplerConfig {
        trace_stride: Some(100),
        ..SamplerConfig::default()
    };
    let rec = run(&inst, AlgorithmId::Lagex, 0, &cfg).unwrap();
    assert_eq!(rec.trace.len() as u64, rec.tau.div_ceil(100));
    assert_eq!(rec.trace[0].t, 3);
    for row in &rec.trace {
        assert!(!row.vertices.is_empty());
        for v in &row.vertices {
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(row.rho >= 0.0);
    }
}

/// True feasible vertices survive the pessimistic shift along simulated
/// uniform-sampling trajectories.
#[test]
fn pessimistic_rows_contain_the_true_set() {
    let inst = instance("setup1-hard", 0.05);
    let truth = inst.feasible_set();
    let (mut ok, mut total) = (0usize, 0usize);
    for traj in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + traj);
        let mut est = EstimatorState::new(inst.k(), inst.d(), 1.0);
        for t in 1..=700u64 {
            let arm = ((t - 1) % inst.k() as u64) as usize;
            est.update(&inst.sample_step(t, arm, &mut rng));
            if t % 35 == 0 {
                let model = est.pessimistic_model(inst.delta());
                for v in truth.vertices() {
                    total += 1;
                    if model.a_tilde.iter().all(|row| dot(row, &v.point) <= 0.0) {
                        ok += 1;
                    }
                }
            }
        }
    }
    assert!(ok as f64 >= 0.99 * total as f64, "{ok}/{total}");
}

#[test]
fn noiseless_trace_approaches_true_vertices() {
    let inst = noiseless_setup1(0.01);
    let truth: Vec<Vec<f64>> = inst.feasible_set().vertices().iter().map(|v| v.point.clone()).collect();
    let cfg = SamplerConfig {
        trace_stride: Some(1000),
        horizon_cap: 5001,
        ..SamplerConfig::default()
    };
    let rec = run(&inst, AlgorithmId::Uniform, 0, &cfg).unwrap();
    let d = |x: &Vec<f64>, y: &Vec<f64>| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let hausdorff = |a: &[Vec<f64>]| {
        let ab = a.iter().map(|x| truth.iter().map(|y| d(x, y)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
        let ba = truth.iter().map(|y| a.iter().map(|x| d(x, y)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
        ab.max(ba)
    };
    let dist: Vec<f64> = rec.trace.iter().map(|r| hausdorff(&r.vertices)).collect();
    assert!(dist.len() >= 3, "{dist:?}");
    for pair in dist.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-9, "{dist:?}");
    }
    assert!(dist.last().unwrap() < &(0.5 * dist[0]), "{dist:?}");
}
