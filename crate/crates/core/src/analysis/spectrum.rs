//! Harmonic means of Hessian spectra and the bounds relating them to the diagonal
//! and to semiconcavity constants.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{check_dim, dense_hessian, norm, Objective};

/// n / Σ 1/vᵢ.
pub fn harmonic_mean(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::invalid("harmonic mean of an empty vector"));
    }
    if let Some(bad) = v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(Error::invalid(format!(
            "harmonic mean needs positive entries, got {bad}"
        )));
    }
    Ok(v.len() as f64 / v.iter().map(|x| 1.0 / x).sum::<f64>())
}

pub fn arithmetic_mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    /// Eigenvalues in increasing order.
    pub eigenvalues: Vec<f64>,
    pub diagonal: Vec<f64>,
    /// Harmonic mean of the positive eigenvalues.
    pub hm_lambda: f64,
    pub hm_diag: f64,
    pub am_lambda: f64,
    /// Some eigenvalue is ≤ 0; `hm_lambda` then covers the positive part only.
    pub indefinite: bool,
    /// HM(Λ) ≤ HM(D).
    pub diag_bound_holds: bool,
    /// Per-axis semiconcavity constants C_k used for the smoothed bound.
    pub c_axes: Vec<f64>,
    /// Laplacian constant C_Lap.
    pub c_lap: f64,
    /// Smoothing time t of the smoothed-Hessian check.
    pub t: f64,
    /// Eigenvalues of the smoothed Hessian A(I + tA)⁻¹ at the minimum.
    pub smoothed_eigenvalues: Vec<f64>,
    pub hm_smoothed: f64,
    /// 1/(t + HM(C)⁻¹).
    pub smoothed_bound: f64,
    pub smoothed_bound_holds: bool,
}

const REL_TOL: f64 = 1e-12;

/// Spectral summary of a symmetric matrix, without the smoothing check.
pub fn matrix_spectrum(a: &DMatrix<f64>) -> Result<SpectrumSummary> {
    summarize(a, 0.0, None)
}

fn summarize(a: &DMatrix<f64>, t: f64, c: Option<&[f64]>) -> Result<SpectrumSummary> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::invalid("spectrum needs a non-empty square matrix"));
    }
    let asym = (a - a.transpose()).abs().max();
    if asym > 1e-9 * (1.0 + a.abs().max()) {
        return Err(Error::invalid(format!(
            "matrix is not symmetric (asymmetry {asym:e})"
        )));
    }
    let eig = SymmetricEigen::new(a.clone());
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let diagonal: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    let positive: Vec<f64> = eigenvalues.iter().copied().filter(|v| *v > 0.0).collect();
    let indefinite = positive.len() < n;
    let hm_lambda = if positive.is_empty() {
        0.0
    } else {
        harmonic_mean(&positive)?
    };
    let hm_diag = if diagonal.iter().all(|d| *d > 0.0) {
        harmonic_mean(&diagonal)?
    } else {
        f64::NAN
    };
    let am_lambda = arithmetic_mean(&eigenvalues);
    let diag_bound_holds = !indefinite && hm_lambda <= hm_diag * (1.0 + REL_TOL);

    let c_axes: Vec<f64> = match c {
        Some(c) => c.to_vec(),
        None => diagonal.clone(),
    };
    let c_lap = c_axes.iter().sum();
    let smoothed_eigenvalues: Vec<f64> = positive.iter().map(|l| l / (1.0 + t * l)).collect();
    let hm_smoothed = if smoothed_eigenvalues.is_empty() {
        0.0
    } else {
        harmonic_mean(&smoothed_eigenvalues)?
    };
    let smoothed_bound = match harmonic_mean(&c_axes) {
        Ok(hm_c) => 1.0 / (t + 1.0 / hm_c),
        Err(_) => f64::NAN,
    };
    let smoothed_bound_holds = hm_smoothed <= smoothed_bound * (1.0 + REL_TOL);
    Ok(SpectrumSummary {
        eigenvalues,
        diagonal,
        hm_lambda,
        hm_diag,
        am_lambda,
        indefinite,
        diag_bound_holds,
        c_axes,
        c_lap,
        t,
        smoothed_eigenvalues,
        hm_smoothed,
        smoothed_bound,
        smoothed_bound_holds,
    })
}

/// Spectrum of ∇²f at the local minimum `x_star`, with the smoothed-Hessian
/// bound HM(Λ_u) ≤ 1/(t + HM(C)⁻¹). `c` defaults to the Hessian diagonal.
pub fn spectrum_summary(
    f: &dyn Objective,
    x_star: &[f64],
    t: f64,
    c: Option<&[f64]>,
) -> Result<SpectrumSummary> {
    check_dim(f.dim(), x_star.len())?;
    let g = norm(&f.gradient_vec(x_star));
    if g > 1e-6 {
        return Err(Error::NotLocalMinimum(format!("|∇f(x*)| = {g:e} > 1e-6")));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("t must be non-negative, got {t}")));
    }
    if let Some(c) = c {
        check_dim(f.dim(), c.len())?;
    }
    let a = dense_hessian(f, x_star)?;
    summarize(&a, t, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::make_quadratic;

    #[test]
    fn harmonic_mean_examples() {
        assert_eq!(harmonic_mean(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert!((harmonic_mean(&[1.0, 3.0]).unwrap() - 1.5).abs() < 1e-15);
        assert!(harmonic_mean(&[1.0, 0.0]).is_err());
        assert!(harmonic_mean(&[1.0, -2.0]).is_err());
    }

    #[test]
    fn two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let s = matrix_spectrum(&a).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-12 && (s.eigenvalues[1] - 3.0).abs() < 1e-12);
        assert!((s.hm_lambda - 1.5).abs() < 1e-12);
        assert!((s.hm_diag - 2.0).abs() < 1e-12);
        assert!(s.diag_bound_holds);
    }

    #[test]
    fn diagonal_matrix_is_tight() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 2.0, 7.0]));
        let s = matrix_spectrum(&a).unwrap();
        assert!((s.hm_lambda - s.hm_diag).abs() < 1e-12);
    }

    #[test]
    fn smoothed_quadratic_bound() {
        let f = make_quadratic(4.0, vec![], 3).unwrap();
        let s = spectrum_summary(&f, &[0.0; 3], 0.5, None).unwrap();
        // Eigenvalues 4/(1 + 2) meet 1/(t + 1/4) with equality.
        assert!((s.hm_smoothed - 4.0 / 3.0).abs() < 1e-12);
        assert!(s.smoothed_bound_holds);
        assert!(spectrum_summary(&f, &[1.0; 3], 0.5, None).is_err());
    }
}
