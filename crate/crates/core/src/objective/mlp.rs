//! Two-layer ReLU classifier on a synthetic two-cluster dataset.
//!
//! Parameters are packed as `[W1 (h×2, row-major), b1 (h), W2 (2×h), b2 (2)]`
//! and the loss is the mean softmax cross-entropy over the dataset.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Objective;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

const INPUTS: usize = 2;
const CLASSES: usize = 2;

#[derive(Debug, Clone)]
pub struct TinyMlp {
    pub seed: u64,
    pub hidden: usize,
    pub batch_size: usize,
    inputs: Vec<[f64; INPUTS]>,
    labels: Vec<usize>,
}

/// Builds the classifier; the dataset is a deterministic function of `seed`.
pub fn make_tiny_mlp(
    seed: u64,
    hidden: usize,
    n_samples: usize,
    batch_size: usize,
) -> Result<TinyMlp> {
    if hidden < 2 {
        return Err(Error::invalid(format!(
            "tiny MLP needs hidden >= 2, got {hidden}"
        )));
    }
    if n_samples < 20 {
        return Err(Error::invalid(format!(
            "tiny MLP needs n_samples >= 20, got {n_samples}"
        )));
    }
    if batch_size == 0 || batch_size > n_samples {
        return Err(Error::invalid(format!(
            "batch size {batch_size} must lie in 1..={n_samples}"
        )));
    }
    let mut rng = rng::stream(seed, "mlp_data");
    let spread = Normal::new(0.0, 0.8).expect("valid normal");
    let centers = [[-1.0, -0.5], [1.0, 0.5]];
    let mut inputs = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let label = i % CLASSES;
        let c = centers[label];
        inputs.push([
            c[0] + spread.sample(&mut rng),
            c[1] + spread.sample(&mut rng),
        ]);
        labels.push(label);
    }
    Ok(TinyMlp {
        seed,
        hidden,
        batch_size,
        inputs,
        labels,
    })
}

impl TinyMlp {
    pub fn n_samples(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_params(&self) -> usize {
        INPUTS * self.hidden + self.hidden + CLASSES * self.hidden + CLASSES
    }

    pub fn with_batch_size(&self, batch_size: usize) -> Result<Self> {
        if batch_size == 0 || batch_size > self.n_samples() {
            return Err(Error::invalid(format!(
                "batch size {batch_size} must lie in 1..={}",
                self.n_samples()
            )));
        }
        Ok(TinyMlp {
            batch_size,
            ..self.clone()
        })
    }

    /// Fraction of training samples classified correctly.
    pub fn accuracy(&self, w: &[f64]) -> f64 {
        let mut hidden = vec![0.0; self.hidden];
        let correct = self
            .inputs
            .iter()
            .zip(&self.labels)
            .filter(|(x, &y)| {
                let logits = self.forward(w, x, &mut hidden);
                let pred = if logits[1] > logits[0] { 1 } else { 0 };
                pred == y
            })
            .count();
        correct as f64 / self.n_samples() as f64
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let h = self.hidden;
        let b1 = INPUTS * h;
        let w2 = b1 + h;
        let b2 = w2 + CLASSES * h;
        (b1, w2, b2)
    }

    fn forward(&self, w: &[f64], x: &[f64; INPUTS], hidden: &mut [f64]) -> [f64; CLASSES] {
        let (b1, w2, b2) = self.offsets();
        let h = self.hidden;
        for j in 0..h {
            let z = w[j * INPUTS] * x[0] + w[j * INPUTS + 1] * x[1] + w[b1 + j];
            hidden[j] = z.max(0.0);
        }
        let mut logits = [0.0; CLASSES];
        for (c, l) in logits.iter_mut().enumerate() {
            let row = &w[w2 + c * h..w2 + (c + 1) * h];
            *l = w[b2 + c]
                + row
                    .iter()
                    .zip(hidden.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
        }
        logits
    }

    /// Adds the gradient of one sample's loss (scaled by `weight`) into `out`;
    /// returns the sample loss.
    fn accumulate(
        &self,
        w: &[f64],
        idx: usize,
        weight: f64,
        hidden: &mut [f64],
        out: &mut [f64],
    ) -> f64 {
        let (b1, w2, b2) = self.offsets();
        let h = self.hidden;
        let x = &self.inputs[idx];
        let y = self.labels[idx];
        let logits = self.forward(w, x, hidden);
        let m = logits[0].max(logits[1]);
        let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
        let lse = m + z.ln();
        let loss = lse - logits[y];
        let mut dlogit = [0.0; CLASSES];
        for c in 0..CLASSES {
            dlogit[c] = (logits[c] - lse).exp() - if c == y { 1.0 } else { 0.0 };
            out[b2 + c] += weight * dlogit[c];
            for j in 0..h {
                out[w2 + c * h + j] += weight * dlogit[c] * hidden[j];
            }
        }
        for j in 0..h {
            if hidden[j] <= 0.0 {
                continue;
            }
            let back = dlogit[0] * w[w2 + j] + dlogit[1] * w[w2 + h + j];
            out[j * INPUTS] += weight * back * x[0];
            out[j * INPUTS + 1] += weight * back * x[1];
            out[b1 + j] += weight * back;
        }
        loss
    }
}

impl Objective for TinyMlp {
    fn name(&self) -> String {
        format!(
            "mlp_h{}_n{}_b{}",
            self.hidden,
            self.n_samples(),
            self.batch_size
        )
    }

    fn dim(&self) -> usize {
        self.n_params()
    }

    fn value(&self, w: &[f64]) -> f64 {
        let mut hidden = vec![0.0; self.hidden];
        let total: f64 = self
            .inputs
            .iter()
            .zip(&self.labels)
            .map(|(x, &y)| {
                let logits = self.forward(w, x, &mut hidden);
                let m = logits[0].max(logits[1]);
                let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
                lse - logits[y]
            })
            .sum();
        total / self.n_samples() as f64
    }

    fn gradient(&self, w: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut hidden = vec![0.0; self.hidden];
        let weight = 1.0 / self.n_samples() as f64;
        for i in 0..self.n_samples() {
            self.accumulate(w, i, weight, &mut hidden, out);
        }
    }

    /// Mean gradient over `batch_size` samples drawn with replacement. A batch
    /// as large as the dataset uses the dataset itself.
    fn stochastic_gradient(&self, w: &[f64], rng: &mut Stream, out: &mut [f64]) {
        if self.batch_size == self.n_samples() {
            self.gradient(w, out);
            return;
        }
        out.fill(0.0);
        let mut hidden = vec![0.0; self.hidden];
        let weight = 1.0 / self.batch_size as f64;
        for _ in 0..self.batch_size {
            let idx = rng.random_range(0..self.n_samples());
            self.accumulate(w, idx, weight, &mut hidden, out);
        }
    }

    fn noise_scale(&self) -> f64 {
        // Intrinsic minibatch noise; not an added term.
        0.0
    }

    fn initial_point(&self, rng: &mut Stream) -> Vec<f64> {
        let (b1, w2, b2) = self.offsets();
        let first = Normal::new(0.0, (2.0 / INPUTS as f64).sqrt()).expect("valid normal");
        let second = Normal::new(0.0, (2.0 / self.hidden as f64).sqrt()).expect("valid normal");
        let mut w = vec![0.0; self.n_params()];
        for v in &mut w[..b1] {
            *v = first.sample(rng);
        }
        for v in &mut w[w2..b2] {
            *v = second.sample(rng);
        }
        w
    }

    fn steps_per_epoch(&self) -> usize {
        self.n_samples().div_ceil(self.batch_size)
    }
}
