use std::sync::Arc;

use proptest::prelude::*;

use hjsmooth::objective::{
    lookup, lookup_entry, make_double_well, make_quadratic, make_rugged_1d, Noisy, Objective,
};
use hjsmooth::rng::stream;

fn central_difference(f: &dyn Objective, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let (mut a, mut b) = (x.to_vec(), x.to_vec());
            a[i] += h;
            b[i] -= h;
            (f.value(&a) - f.value(&b)) / (2.0 * h)
        })
        .collect()
}

fn assert_gradient_matches(f: &dyn Objective, x: &[f64]) {
    let g = f.gradient_vec(x);
    let fd = central_difference(f, x, 1e-6);
    let scale = g.iter().map(|v| v.abs()).fold(1.0, f64::max);
    for (a, b) in g.iter().zip(&fd) {
        assert!(
            (a - b).abs() <= 1e-5 * scale,
            "gradient {g:?} vs differences {fd:?} at {x:?}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadratic_gradient_matches_differences(c in 0.1f64..5.0, p in prop::collection::vec(-2.0f64..2.0, 3), x in prop::collection::vec(-3.0f64..3.0, 3)) {
        assert_gradient_matches(&make_quadratic(c, p, 3).unwrap(), &x);
    }

    #[test]
    fn double_well_gradient_matches_differences(a in 0.3f64..2.0, x in -3.0f64..3.0) {
        assert_gradient_matches(&make_double_well(a).unwrap(), &[x]);
    }

    #[test]
    fn rugged_gradient_matches_differences(seed in 0u64..50, modes in 2usize..9, x in -1.9f64..1.9) {
        assert_gradient_matches(&make_rugged_1d(seed, modes).unwrap(), &[x]);
    }

    #[test]
    fn hessian_is_symmetric_and_matches_gradient_differences(c in 0.1f64..5.0, x in prop::collection::vec(-3.0f64..3.0, 2), a in 0.3f64..2.0) {
        let objectives: Vec<Box<dyn Objective>> = vec![
            Box::new(make_quadratic(c, vec![0.3, -0.2], 2).unwrap()),
            Box::new(make_double_well(a).unwrap()),
        ];
        for f in objectives {
            let x = &x[..f.dim()];
            let Some(hess) = f.hessian(x) else { continue };
            let n = f.dim();
            let h = 1e-6;
            for i in 0..n {
                let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
                xp[i] += h;
                xm[i] -= h;
                let (gp, gm) = (f.gradient_vec(&xp), f.gradient_vec(&xm));
                for j in 0..n {
                    prop_assert!((hess[(i, j)] - hess[(j, i)]).abs() < 1e-12);
                    let fd = (gp[j] - gm[j]) / (2.0 * h);
                    prop_assert!((hess[(j, i)] - fd).abs() <= 1e-5 * hess[(j, i)].abs().max(1.0));
                }
            }
        }
    }
}

#[test]
fn mlp_gradient_matches_differences() {
    let f = lookup("mlp_h4_n40").unwrap();
    let mut rng = stream(3, "probe");
    for _ in 0..5 {
        let x = f.initial_point(&mut rng);
        assert_gradient_matches(f.as_ref(), &x);
    }
}

#[test]
fn stochastic_gradient_is_unbiased() {
    for name in ["double_well_a1+noise0.5", "mlp_h4_n40_b8"] {
        let f = lookup(name).unwrap();
        let x = f.initial_point(&mut stream(1, "init"));
        let exact = f.gradient_vec(&x);
        let mut rng = stream(1, "draws");
        let n = 20_000;
        let mut sum = vec![0.0; f.dim()];
        let mut sum_sq = vec![0.0; f.dim()];
        let mut g = vec![0.0; f.dim()];
        for _ in 0..n {
            f.stochastic_gradient(&x, &mut rng, &mut g);
            for i in 0..g.len() {
                sum[i] += g[i];
                sum_sq[i] += g[i] * g[i];
            }
        }
        for i in 0..g.len() {
            let mean = sum[i] / n as f64;
            let var = (sum_sq[i] / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - exact[i]).abs() <= 5.0 * se + 1e-12,
                "{name} component {i}: {mean} vs {}",
                exact[i]
            );
        }
    }
}

#[test]
fn noise_wrapper_keeps_value_and_gradient() {
    let q = Arc::new(make_quadratic(2.0, vec![], 2).unwrap());
    let n = Noisy::new(q.clone(), 0.3).unwrap();
    assert_eq!(n.value(&[1.0, 2.0]), q.value(&[1.0, 2.0]));
    assert_eq!(n.gradient_vec(&[1.0, 2.0]), q.gradient_vec(&[1.0, 2.0]));
    assert_eq!(n.noise_scale(), 0.3);
}

#[test]
fn known_minima_are_stationary() {
    for name in [
        "double_well_a1",
        "double_well_a0.5",
        "quadratic_c2_n3",
        "rugged_s7_m5",
        "rugged_s3_m8",
        "sine_k3",
    ] {
        let entry = lookup_entry(name).unwrap();
        assert!(!entry.known_minima.is_empty(), "{name} has no minima");
        for (x, value) in &entry.known_minima {
            let g = entry.objective.gradient_vec(x);
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= 1e-8, "{name}: |grad| = {norm:e} at {x:?}");
            assert!((entry.objective.value(x) - value).abs() < 1e-12);
        }
    }
}

#[test]
fn rugged_objective_has_at_least_the_requested_minima() {
    for modes in [2, 5, 8] {
        let entry = lookup_entry(&format!("rugged_s11_m{modes}")).unwrap();
        assert!(
            entry.known_minima.len() >= modes,
            "{} minima for {modes} modes",
            entry.known_minima.len()
        );
    }
}

#[test]
fn corpus_rejects_bad_names_and_parameters() {
    assert!(lookup("quadratic_c0_n2").is_err());
    assert!(lookup("double_well_a-1").is_err());
    assert!(lookup("rugged_s1_m1").is_err());
    assert!(lookup("mlp_h1_n100").is_err());
    assert!(lookup("nonsense").is_err());
}
