use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use hjsmooth::analysis::{
    harmonic_mean, matrix_spectrum, quadratic_invariant_closed_form, sample_invariant_measure_with,
    SamplerConfig,
};
use hjsmooth::objective::{Objective, Quadratic};

fn spd(entries: &[f64], n: usize, shift: f64) -> DMatrix<f64> {
    let b = DMatrix::from_row_slice(n, n, &entries[..n * n]);
    &b * b.transpose() + DMatrix::identity(n, n) * shift
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn harmonic_mean_sandwich(v in prop::collection::vec(1e-3f64..1e3, 1..30)) {
        let hm = harmonic_mean(&v).unwrap();
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let n = v.len() as f64;
        prop_assert!(min * (1.0 - 1e-12) <= hm && hm <= n * min * (1.0 + 1e-12));
        let am = v.iter().sum::<f64>() / n;
        prop_assert!(hm <= am * (1.0 + 1e-12));
    }

    #[test]
    fn eigenvalue_harmonic_mean_below_diagonal(entries in prop::collection::vec(-2.0f64..2.0, 36), n in 2usize..7, shift in 1e-3f64..1.0) {
        let s = matrix_spectrum(&spd(&entries, n, shift)).unwrap();
        prop_assert!(!s.indefinite);
        prop_assert!(s.hm_lambda <= s.hm_diag * (1.0 + 1e-10));
        prop_assert!(s.diag_bound_holds);
        let min = s.eigenvalues[0];
        prop_assert!(min * (1.0 - 1e-10) <= s.hm_lambda && s.hm_lambda <= n as f64 * min * (1.0 + 1e-10));
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn closed_form_covariance_is_spd_and_mean_solves_stationarity(entries in prop::collection::vec(-1.0f64..1.0, 9), p in prop::collection::vec(-1.0f64..1.0, 3), x in prop::collection::vec(-2.0f64..2.0, 3), gamma in 0.05f64..2.0, beta in 0.5f64..5.0) {
        let q = spd(&entries, 3, 0.1);
        let r = quadratic_invariant_closed_form(&q, &p, &x, gamma, beta).unwrap();
        let cov = &r.exact.covariance;
        prop_assert!((cov - cov.transpose()).abs().max() < 1e-12);
        prop_assert!(cov.clone().symmetric_eigen().eigenvalues.iter().all(|e| *e > 0.0));
        // The mode of f(y) + |x − y|²/(2γ) has zero gradient.
        let mu = DVector::from_column_slice(&r.exact.mean);
        let grad = &q * &mu + DVector::from_column_slice(&p) + (&mu - DVector::from_column_slice(&x)) / gamma;
        prop_assert!(grad.amax() < 1e-9);
    }
}

/// Quadratic f(y) = ½yᵀQy + pᵀy with a general SPD Q.
#[derive(Debug)]
struct General {
    q: DMatrix<f64>,
    p: Vec<f64>,
}

impl Objective for General {
    fn name(&self) -> String {
        "general_quadratic".into()
    }
    fn dim(&self) -> usize {
        self.p.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        0.5 * v.dot(&(&self.q * &v)) + v.dot(&DVector::from_column_slice(&self.p))
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let g = &self.q * DVector::from_column_slice(x);
        for i in 0..out.len() {
            out[i] = g[i] + self.p[i];
        }
    }
    fn hessian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        Some(self.q.clone())
    }
}

#[test]
fn sampler_matches_closed_form_on_random_spd_quadratics() {
    let cases = [
        (
            [0.9, 0.1, -0.3, 0.2, 0.7, 0.4, -0.5, 0.3, 1.1],
            [0.3, -0.2, 0.5],
            [1.0, -1.0, 0.5],
        ),
        (
            [0.4, -0.6, 0.1, 0.8, 0.2, -0.3, 0.1, 0.5, 0.6],
            [-0.4, 0.1, 0.0],
            [-0.5, 2.0, 1.0],
        ),
        (
            [1.2, 0.0, 0.3, -0.2, 0.5, 0.1, 0.4, -0.1, 0.8],
            [0.0, 0.6, -0.3],
            [0.2, 0.3, -1.5],
        ),
    ];
    let (gamma, beta) = (0.5, 2.0);
    for (i, (entries, p, x)) in cases.iter().enumerate() {
        let q = spd(entries, 3, 0.2);
        let exact = quadratic_invariant_closed_form(&q, p, x, gamma, beta)
            .unwrap()
            .exact;
        let f = General { q, p: p.to_vec() };
        let cfg = SamplerConfig {
            gamma,
            beta_inv: 1.0 / beta,
            eta_y: None,
            n_steps: 2_000_000,
            burn_in: 50_000,
        };
        let est = sample_invariant_measure_with(&f, x, &cfg, i as u64).unwrap();
        for k in 0..3 {
            let z = (est.mean[k] - exact.mean[k]) / est.mean_stderr[k];
            assert!(
                z.abs() <= 3.0,
                "case {i} mean {k}: {} vs {} (z = {z:.2})",
                est.mean[k],
                exact.mean[k]
            );
            let zv = (est.covariance[(k, k)] - exact.covariance[(k, k)]) / est.variance_stderr[k];
            assert!(zv.abs() <= 3.0, "case {i} variance {k}: z = {zv:.2}");
        }
        let c = &est.covariance;
        assert!((c - c.transpose()).abs().max() < 1e-12);
        assert!(c
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .all(|e| *e >= 0.0));
    }
}

#[test]
fn diagonal_quadratic_objective_agrees_with_general_form() {
    let q = Quadratic {
        c: 2.0,
        p: vec![0.5, -1.0],
    };
    let g = General {
        q: DMatrix::identity(2, 2) * 2.0,
        p: vec![0.5, -1.0],
    };
    for x in [[0.0, 0.0], [1.0, -2.0], [-0.3, 0.7]] {
        assert!((q.value(&x) - g.value(&x)).abs() < 1e-14);
        assert_eq!(q.gradient_vec(&x), g.gradient_vec(&x));
    }
}
