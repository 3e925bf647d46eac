//! Small statistics helpers shared by the Monte Carlo code.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Standard error of the mean for independent samples.
pub fn std_err(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Normalised autocorrelation function of `xs` up to lag `n - 1`, via FFT.
pub fn autocorrelation(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n == 0 {
        return Vec::new();
    }
    let m = mean(xs);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = xs
        .iter()
        .map(|x| Complex::new(x - m, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if c0 <= 0.0 {
        let mut out = vec![0.0; n];
        out[0] = 1.0;
        return out;
    }
    buf.iter().take(n).map(|c| c.re / c0).collect()
}

/// Integrated autocorrelation time with Sokal's automatic window (c = 5).
///
/// Returned in units of samples; 1.0 means uncorrelated.
pub fn integrated_autocorrelation_time(xs: &[f64]) -> f64 {
    let rho = autocorrelation(xs);
    if rho.len() < 2 {
        return 1.0;
    }
    let mut tau = 1.0;
    for (lag, r) in rho.iter().enumerate().skip(1) {
        tau += 2.0 * r;
        if (lag as f64) >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Standard error of the mean of a correlated series.
pub fn correlated_std_err(xs: &[f64]) -> (f64, f64) {
    let tau = integrated_autocorrelation_time(xs);
    let n = xs.len() as f64;
    let var = variance(xs);
    ((var * tau / n).sqrt(), tau)
}

/// Mean, standard deviation and standard error of a batch of scalars.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        Summary {
            mean: mean(xs),
            std: std_dev(xs),
            stderr: std_err(xs),
            n: xs.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn white_noise_has_unit_iat() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let tau = integrated_autocorrelation_time(&xs);
        assert!((tau - 1.0).abs() < 0.15, "tau = {tau}");
    }

    #[test]
    fn ar1_iat_matches_closed_form() {
        // x_{k+1} = a x_k + noise has tau = (1 + a) / (1 - a).
        let a: f64 = 0.9;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..200_000)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = a * x + e;
                x
            })
            .collect();
        let tau = integrated_autocorrelation_time(&xs);
        let expected = (1.0 + a) / (1.0 - a);
        assert!((tau - expected).abs() / expected < 0.1, "tau = {tau}");
    }
}
