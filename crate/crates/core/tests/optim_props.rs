use std::sync::Arc;

use proptest::prelude::*;

use hjsmooth::objective::{lookup, make_quadratic, Noisy, ObjectiveRef};
use hjsmooth::optim::{gamma_schedule, run, step_fn, Algorithm, OptimizerConfig, OptimizerState};

fn noisy_quadratic() -> ObjectiveRef {
    let q: ObjectiveRef = Arc::new(make_quadratic(1.0, vec![0.2, -0.4, 0.1], 3).unwrap());
    Arc::new(Noisy::new(q, 0.5).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_schedule_is_positive_and_non_increasing(g0 in 1e-4f64..1.0, g1 in 0.0f64..0.5, l in 1usize..30, per_dim: bool, dim in 1usize..10) {
        let mut cfg = OptimizerConfig::for_algorithm(Algorithm::EntropySgd);
        cfg.gamma0 = g0;
        cfg.gamma1 = g1;
        cfg.l = l;
        cfg.gamma_per_dim = per_dim;
        let mut prev = f64::INFINITY;
        for k in 0..200u64 {
            let g = gamma_schedule(k, &cfg, dim);
            prop_assert!(g > 0.0 && g <= prev);
            if k % l as u64 != 0 {
                prop_assert_eq!(g, prev);
            }
            prev = g;
        }
    }

    #[test]
    fn replay_reproduces_rows(seed in 0u64..1000, algo_index in 0usize..6) {
        let algo = Algorithm::ALL[algo_index];
        let f = noisy_quadratic();
        let mut cfg = OptimizerConfig::for_algorithm(algo);
        cfg.log_every = 3;
        let a = run(algo, f.as_ref(), &cfg, seed, 30).unwrap();
        let b = run(algo, f.as_ref(), &cfg, seed, 30).unwrap();
        prop_assert_eq!(&a.terminal_x, &b.terminal_x);
        prop_assert_eq!(a.rows.len(), b.rows.len());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            prop_assert_eq!((ra.k, ra.grad_evals, ra.loss, ra.gamma), (rb.k, rb.grad_evals, rb.loss, rb.gamma));
        }
        prop_assert!(a.rows.windows(2).all(|w| w[0].k < w[1].k));
    }
}

#[test]
fn inner_state_resets_to_center_after_outer_updates() {
    let f = noisy_quadratic();
    for algo in [Algorithm::EntropySgd, Algorithm::Hj, Algorithm::Elastic] {
        let cfg = OptimizerConfig::for_algorithm(algo);
        let mut state = OptimizerState::new(algo, f.as_ref(), &cfg, 5).unwrap();
        let mut step = step_fn(algo);
        for _ in 0..200 {
            let out = step(&mut state, f.as_ref(), &cfg).unwrap();
            for y in &state.y {
                assert_eq!(y.len(), 3);
            }
            assert_eq!((state.x.len(), state.y_avg.len(), state.z.len()), (3, 3, 3));
            if out.outer_update {
                assert_eq!(state.k % cfg.l as u64, 0);
                if algo != Algorithm::Elastic {
                    assert_eq!(state.y_avg, state.x, "{algo}");
                    assert_eq!(state.y[0], state.x, "{algo}");
                }
            }
        }
    }
}

#[test]
fn elastic_worker_parallelism_does_not_change_output() {
    let f = noisy_quadratic();
    let mut cfg = OptimizerConfig::for_algorithm(Algorithm::Elastic);
    cfg.n_workers = 4;
    cfg.parallel_workers = false;
    let a = run(Algorithm::Elastic, f.as_ref(), &cfg, 9, 50).unwrap();
    cfg.parallel_workers = true;
    let b = run(Algorithm::Elastic, f.as_ref(), &cfg, 9, 50).unwrap();
    assert_eq!(a.terminal_x, b.terminal_x);
}

#[test]
fn every_algorithm_reduces_a_quadratic() {
    let f = noisy_quadratic();
    for algo in Algorithm::ALL {
        let mut cfg = OptimizerConfig::for_algorithm(algo);
        cfg.x0 = Some(vec![2.0, 2.0, 2.0]);
        let rec = run(algo, f.as_ref(), &cfg, 1, 300).unwrap();
        assert!(!rec.aborted, "{algo}: {:?}", rec.abort_reason);
        assert!(
            rec.final_loss() < 0.2 * rec.rows[0].loss,
            "{algo}: {} -> {}",
            rec.rows[0].loss,
            rec.final_loss()
        );
    }
}

#[test]
fn divergent_step_size_aborts_with_partial_record() {
    let f = lookup("quadratic_c1_n2").unwrap();
    let mut cfg = OptimizerConfig::for_algorithm(Algorithm::Sgd);
    cfg.eta = 5.0;
    cfg.delta = 0.0;
    cfg.log_every = 1;
    let rec = run(Algorithm::Sgd, f.as_ref(), &cfg, 0, 100_000).unwrap();
    assert!(rec.aborted);
    assert!(rec.abort_reason.is_some());
    assert!(rec.rows.len() > 1);
}

#[test]
fn invalid_configs_are_rejected() {
    let f = noisy_quadratic();
    let mut cfg = OptimizerConfig::for_algorithm(Algorithm::Elastic);
    cfg.n_workers = 0;
    assert!(run(Algorithm::Elastic, f.as_ref(), &cfg, 0, 1).is_err());
    let mut cfg = OptimizerConfig::for_algorithm(Algorithm::EntropySgd);
    cfg.l = 0;
    assert!(run(Algorithm::EntropySgd, f.as_ref(), &cfg, 0, 1).is_err());
    let mut cfg = OptimizerConfig::for_algorithm(Algorithm::Sgd);
    cfg.delta = 1.0;
    assert!(run(Algorithm::Sgd, f.as_ref(), &cfg, 0, 1).is_err());
    let mut cfg = OptimizerConfig::for_algorithm(Algorithm::Hj);
    cfg.gamma0 = 0.0;
    assert!(run(Algorithm::Hj, f.as_ref(), &cfg, 0, 1).is_err());
}
