//! Separable Gaussian-kernel quadrature shared by the Cole-Hopf and heat solvers.
//!
//! Quadrature nodes form a lattice of spacing h/m aligned with the target grid,
//! so every target sees the same discrete kernel. The kernel is normalized on
//! the lattice, which makes the rule exact for constants and reduces to the
//! identity as the kernel width goes to zero.

use rayon::prelude::*;

use super::grid::GridGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Accumulate {
    /// Σ K(x − y) g(y)
    Linear,
    /// log Σ K(x − y) exp(g(y)), evaluated with max-subtraction.
    LogSumExp,
}

/// Quadrature lattice along one axis.
#[derive(Debug, Clone)]
pub(crate) struct Lattice {
    /// Node coordinates.
    pub nodes: Vec<f64>,
    /// Refinement factor relative to the target grid.
    refine: usize,
    /// Kernel half-width in nodes (non-periodic) or `None` for a full periodic ring.
    half_width: Option<usize>,
    /// Normalized log-kernel, indexed by offset (`d + J` or ring offset).
    log_kernel: Vec<f64>,
    n_targets: usize,
}

const MAX_REFINE: usize = 64;

impl Lattice {
    /// Builds the lattice for axis `axis` of `grid`, Gaussian variance `sigma2`,
    /// and a kernel support radius `radius`.
    pub fn new(grid: &GridGeometry, axis: usize, sigma2: f64, radius: f64, periodic: bool) -> Self {
        let h = grid.spacing(axis);
        let sigma = sigma2.sqrt();
        let refine = ((4.0 * h / sigma).ceil() as usize).clamp(1, MAX_REFINE);
        let hq = h / refine as f64;
        let n = grid.n_points[axis];
        let lo = grid.lower[axis];
        if periodic {
            let ring = (n - 1) * refine;
            let period = grid.upper[axis] - grid.lower[axis];
            let images = (8.0 * sigma / period).ceil() as i64 + 1;
            let raw: Vec<f64> = (0..ring)
                .map(|d| {
                    let terms: Vec<f64> = (-images..=images)
                        .map(|k| {
                            let r = d as f64 * hq - k as f64 * period;
                            -r * r / (2.0 * sigma2)
                        })
                        .collect();
                    log_sum_exp(&terms)
                })
                .collect();
            let norm = log_sum_exp(&raw);
            Lattice {
                nodes: (0..ring).map(|k| lo + k as f64 * hq).collect(),
                refine,
                half_width: None,
                log_kernel: raw.iter().map(|v| v - norm).collect(),
                n_targets: n,
            }
        } else {
            let j = (radius / hq).ceil().max(1.0) as usize;
            let raw: Vec<f64> = (0..=2 * j)
                .map(|d| {
                    let r = (d as f64 - j as f64) * hq;
                    -r * r / (2.0 * sigma2)
                })
                .collect();
            let norm = log_sum_exp(&raw);
            let count = (n - 1) * refine + 2 * j + 1;
            let start = lo - j as f64 * hq;
            Lattice {
                nodes: (0..count).map(|k| start + k as f64 * hq).collect(),
                refine,
                half_width: Some(j),
                log_kernel: raw.iter().map(|v| v - norm).collect(),
                n_targets: n,
            }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Calls `visit(log_kernel, node)` for every node in the support of target `i`.
    #[inline]
    fn for_support(&self, i: usize, mut visit: impl FnMut(f64, usize)) {
        match self.half_width {
            Some(_) => {
                let base = i * self.refine;
                for (d, &k) in self.log_kernel.iter().enumerate() {
                    visit(k, base + d);
                }
            }
            None => {
                let ring = self.nodes.len();
                let base = (i * self.refine) % ring;
                for (d, &k) in self.log_kernel.iter().enumerate() {
                    visit(k, (base + d) % ring);
                }
            }
        }
    }

    fn reduce(&self, mode: Accumulate, i: usize, value: impl Fn(usize) -> f64) -> f64 {
        match mode {
            Accumulate::Linear => {
                let mut s = 0.0;
                self.for_support(i, |k, node| s += k.exp() * value(node));
                s
            }
            Accumulate::LogSumExp => {
                let mut m = f64::NEG_INFINITY;
                self.for_support(i, |k, node| m = m.max(k + value(node)));
                if m == f64::NEG_INFINITY {
                    return m;
                }
                let mut s = 0.0;
                self.for_support(i, |k, node| s += (k + value(node) - m).exp());
                m + s.ln()
            }
        }
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Evaluates `f` on the tensor product of the lattices, row-major.
pub(crate) fn tabulate(lattices: &[Lattice], f: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
    match lattices.len() {
        1 => lattices[0].nodes.par_iter().map(|&y| f(&[y])).collect(),
        _ => {
            let a1 = &lattices[1].nodes;
            lattices[0]
                .nodes
                .par_iter()
                .flat_map_iter(|&y0| a1.iter().map(|&y1| f(&[y0, y1])).collect::<Vec<_>>())
                .collect()
        }
    }
}

/// Convolves `g` (tabulated on the lattices) with the normalized Gaussian and
/// returns values at the target grid nodes, row-major.
pub(crate) fn gaussian_convolve(lattices: &[Lattice], g: &[f64], mode: Accumulate) -> Vec<f64> {
    let l0 = &lattices[0];
    if lattices.len() == 1 {
        return (0..l0.n_targets)
            .into_par_iter()
            .map(|i| l0.reduce(mode, i, |k| g[k]))
            .collect();
    }
    let l1 = &lattices[1];
    let nq1 = l1.len();
    let partial: Vec<Vec<f64>> = (0..l0.n_targets)
        .into_par_iter()
        .map(|i| {
            (0..nq1)
                .map(|q1| l0.reduce(mode, i, |q0| g[q0 * nq1 + q1]))
                .collect()
        })
        .collect();
    partial
        .par_iter()
        .flat_map_iter(|p| (0..l1.n_targets).map(move |j| l1.reduce(mode, j, |q1| p[q1])))
        .collect()
}
