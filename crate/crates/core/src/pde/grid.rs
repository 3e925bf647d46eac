//! Uniform tensor grids in one or two dimensions and the scalar fields sampled on them.
//!
//! Values are stored row-major: in 2D the flat index of node `(i, j)` is
//! `i * n[1] + j`, with `i` running along the first axis.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;

/// Largest per-axis node count accepted for two-dimensional grids.
pub const MAX_POINTS_2D: usize = 257;

const BINARY_MAGIC: &[u8; 4] = b"HJGF";
const BINARY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n_points: Vec<usize>,
}

impl GridGeometry {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, n_points: Vec<usize>) -> Result<Self> {
        let dim = lower.len();
        if !(1..=2).contains(&dim) || upper.len() != dim || n_points.len() != dim {
            return Err(Error::invalid(
                "grids must be 1D or 2D with matching bounds and counts",
            ));
        }
        for k in 0..dim {
            if n_points[k] < 3 {
                return Err(Error::invalid(format!("axis {k}: need at least 3 points")));
            }
            if !(upper[k] > lower[k]) || !lower[k].is_finite() || !upper[k].is_finite() {
                return Err(Error::invalid(format!(
                    "axis {k}: empty or non-finite bounds"
                )));
            }
            if dim == 2 && n_points[k] > MAX_POINTS_2D {
                return Err(Error::invalid(format!(
                    "axis {k}: 2D grids are limited to {MAX_POINTS_2D} points per axis"
                )));
            }
        }
        Ok(GridGeometry {
            lower,
            upper,
            n_points,
        })
    }

    pub fn uniform_1d(lower: f64, upper: f64, n: usize) -> Result<Self> {
        Self::new(vec![lower], vec![upper], vec![n])
    }

    /// Grid over an objective's domain box with `n` points per axis.
    pub fn for_objective(f: &dyn Objective, n: usize) -> Result<Self> {
        let (lo, hi) = f
            .domain_box()
            .ok_or_else(|| Error::invalid(format!("objective {} has no domain box", f.name())))?;
        let dim = lo.len();
        Self::new(lo, hi, vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn len(&self) -> usize {
        self.n_points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.n_points[axis] - 1) as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim())
            .map(|k| self.spacing(k))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + i as f64 * self.spacing(axis)
    }

    pub fn coords(&self, axis: usize) -> Vec<f64> {
        (0..self.n_points[axis])
            .map(|i| self.coord(axis, i))
            .collect()
    }

    /// Distance between flat neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        if self.dim() == 2 && axis == 0 {
            self.n_points[1]
        } else {
            1
        }
    }

    pub fn unravel(&self, flat: usize) -> [usize; 2] {
        if self.dim() == 1 {
            [flat, 0]
        } else {
            [flat / self.n_points[1], flat % self.n_points[1]]
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let idx = self.unravel(flat);
        (0..self.dim()).map(|k| self.coord(k, idx[k])).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(k, &v)| v >= self.lower[k] && v <= self.upper[k])
    }

    /// Same box with `n` points per axis.
    pub fn with_points(&self, n: usize) -> Result<Self> {
        Self::new(self.lower.clone(), self.upper.clone(), vec![n; self.dim()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub geometry: GridGeometry,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::DimensionMismatch {
                expected: geometry.len(),
                got: values.len(),
            });
        }
        Ok(GridFunction { geometry, values })
    }

    pub fn from_fn(geometry: &GridGeometry, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..geometry.len()).map(|i| f(&geometry.point(i))).collect();
        GridFunction {
            geometry: geometry.clone(),
            values,
        }
    }

    pub fn sample(f: &dyn Objective, geometry: &GridGeometry) -> Result<Self> {
        crate::objective::check_dim(geometry.dim(), f.dim())?;
        Ok(Self::from_fn(geometry, |x| f.value(x)))
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v < self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Trapezoidal integral over the box.
    pub fn integral(&self) -> f64 {
        let g = &self.geometry;
        let weight = |axis: usize, i: usize| {
            let w = g.spacing(axis);
            if i == 0 || i + 1 == g.n_points[axis] {
                0.5 * w
            } else {
                w
            }
        };
        self.values
            .iter()
            .enumerate()
            .map(|(flat, v)| {
                let idx = g.unravel(flat);
                (0..g.dim()).map(|k| weight(k, idx[k])).product::<f64>() * v
            })
            .sum()
    }

    /// Checks the density invariants: non-negative with unit mass.
    pub fn check_density(&self, tol: f64) -> Result<()> {
        if let Some((i, v)) = self
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| **v < 0.0 || !v.is_finite())
        {
            return Err(Error::NegativeDensity {
                index: i,
                value: *v,
            });
        }
        let mass = self.integral();
        if (mass - 1.0).abs() > tol {
            return Err(Error::invalid(format!(
                "density integrates to {mass}, not 1"
            )));
        }
        Ok(())
    }

    /// Rescales to unit trapezoidal mass.
    pub fn normalized(mut self) -> Result<Self> {
        let m = self.integral();
        if !(m > 0.0) {
            return Err(Error::invalid(
                "cannot normalise a field with non-positive mass",
            ));
        }
        self.values.iter_mut().for_each(|v| *v /= m);
        Ok(self)
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Multilinear interpolation; points outside the box are clamped to it.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.geometry;
        let mut base = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for k in 0..g.dim() {
            let s = ((x[k] - g.lower[k]) / g.spacing(k)).clamp(0.0, (g.n_points[k] - 1) as f64);
            let i = (s.floor() as usize).min(g.n_points[k] - 2);
            base[k] = i;
            frac[k] = s - i as f64;
        }
        if g.dim() == 1 {
            let v0 = self.values[base[0]];
            let v1 = self.values[base[0] + 1];
            v0 + frac[0] * (v1 - v0)
        } else {
            let n1 = g.n_points[1];
            let at = |i: usize, j: usize| self.values[i * n1 + j];
            let (i, j) = (base[0], base[1]);
            let (a, b) = (frac[0], frac[1]);
            (1.0 - a) * (1.0 - b) * at(i, j)
                + a * (1.0 - b) * at(i + 1, j)
                + (1.0 - a) * b * at(i, j + 1)
                + a * b * at(i + 1, j + 1)
        }
    }

    /// Partial derivative along `axis`: central differences inside, one-sided at the edges.
    pub fn derivative(&self, axis: usize) -> GridFunction {
        let g = &self.geometry;
        let h = g.spacing(axis);
        let s = g.stride(axis);
        let n = g.n_points[axis];
        let values = (0..g.len())
            .map(|flat| {
                let i = g.unravel(flat)[axis];
                if i == 0 {
                    (self.values[flat + s] - self.values[flat]) / h
                } else if i + 1 == n {
                    (self.values[flat] - self.values[flat - s]) / h
                } else {
                    (self.values[flat + s] - self.values[flat - s]) / (2.0 * h)
                }
            })
            .collect();
        GridFunction {
            geometry: g.clone(),
            values,
        }
    }

    pub fn gradient(&self) -> Vec<GridFunction> {
        (0..self.dim()).map(|k| self.derivative(k)).collect()
    }

    /// Second difference along `axis` at interior nodes; `None` on the boundary of that axis.
    pub fn second_difference(&self, axis: usize, flat: usize) -> Option<f64> {
        let g = &self.geometry;
        let i = g.unravel(flat)[axis];
        if i == 0 || i + 1 == g.n_points[axis] {
            return None;
        }
        let s = g.stride(axis);
        let h = g.spacing(axis);
        Some((self.values[flat + s] - 2.0 * self.values[flat] + self.values[flat - s]) / (h * h))
    }

    /// Largest second difference along `axis` over nodes interior to every axis.
    pub fn max_second_difference(&self, axis: usize) -> f64 {
        self.interior_nodes()
            .filter_map(|flat| self.second_difference(axis, flat))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest discrete Laplacian over nodes interior to every axis.
    pub fn max_laplacian(&self) -> f64 {
        self.interior_nodes()
            .map(|flat| {
                (0..self.dim())
                    .filter_map(|k| self.second_difference(k, flat))
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        let g = &self.geometry;
        (0..g.len()).filter(move |&flat| {
            let idx = g.unravel(flat);
            (0..g.dim()).all(|k| idx[k] > 0 && idx[k] + 1 < g.n_points[k])
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to(&self, w: &mut impl Write) -> Result<()> {
        let g = &self.geometry;
        if g.dim() == 1 {
            writeln!(w, "x,value")?;
        } else {
            writeln!(w, "x,y,value")?;
        }
        for (flat, v) in self.values.iter().enumerate() {
            let p = g.point(flat);
            let coords: Vec<String> = p.iter().map(|c| format!("{c:.17e}")).collect();
            writeln!(w, "{},{v:.17e}", coords.join(","))?;
        }
        Ok(())
    }

    /// Reads a CSV written by [`GridFunction::write_csv`], recovering the geometry from the nodes.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::GridFormat {
            path: path.to_path_buf(),
            reason: reason.into(),
        };
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))??;
        let dim = match header.trim() {
            "x,value" => 1,
            "x,y,value" => 2,
            _ => return Err(bad("unexpected header")),
        };
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let row = row.map_err(|_| bad("unparsable number"))?;
            if row.len() != dim + 1 {
                return Err(bad("wrong column count"));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(bad("no data rows"));
        }
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut counts = Vec::new();
        for k in 0..dim {
            let mut axis: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            axis.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            axis.dedup();
            lower.push(axis[0]);
            upper.push(*axis.last().expect("non-empty"));
            counts.push(axis.len());
        }
        let geometry = GridGeometry::new(lower, upper, counts).map_err(|e| bad(&e.to_string()))?;
        if geometry.len() != rows.len() {
            return Err(bad("rows do not form a full tensor grid"));
        }
        let values = rows.iter().map(|r| r[dim]).collect();
        GridFunction::new(geometry, values)
    }

    /// Compact binary form: magic `HJGF`, u32 version, u32 dim, then per axis
    /// f64 lower and f64 upper, then per axis u64 count, then the f64 values.
    /// All fields little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.geometry;
        let mut out = Vec::with_capacity(16 + 24 * g.dim() + 8 * self.values.len());
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
        out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
        for k in 0..g.dim() {
            out.extend_from_slice(&g.lower[k].to_le_bytes());
            out.extend_from_slice(&g.upper[k].to_le_bytes());
        }
        for k in 0..g.dim() {
            out.extend_from_slice(&(g.n_points[k] as u64).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> std::result::Result<&[u8], String> {
            let s = bytes
                .get(pos..pos + n)
                .ok_or_else(|| "truncated".to_string())?;
            pos += n;
            Ok(s)
        };
        if take(4)? != BINARY_MAGIC {
            return Err("bad magic".into());
        }
        let version = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
        if version != BINARY_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let dim = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
        if !(1..=2).contains(&dim) {
            return Err(format!("unsupported dimension {dim}"));
        }
        let mut lower = Vec::with_capacity(dim);
        let mut upper = Vec::with_capacity(dim);
        for _ in 0..dim {
            lower.push(f64::from_le_bytes(take(8)?.try_into().expect("8 bytes")));
            upper.push(f64::from_le_bytes(take(8)?.try_into().expect("8 bytes")));
        }
        let mut counts = Vec::with_capacity(dim);
        for _ in 0..dim {
            counts.push(u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize);
        }
        let geometry = GridGeometry::new(lower, upper, counts).map_err(|e| e.to_string())?;
        let n = geometry.len();
        let payload = take(8 * n)?;
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if pos != bytes.len() {
            return Err("trailing bytes".into());
        }
        Ok(GridFunction { geometry, values })
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes).map_err(|reason| Error::GridFormat {
            path: path.to_path_buf(),
            reason,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn geometry_validation() {
        assert!(GridGeometry::uniform_1d(0.0, 1.0, 2).is_err());
        assert!(GridGeometry::uniform_1d(1.0, 1.0, 10).is_err());
        assert!(GridGeometry::new(vec![0.0; 2], vec![1.0; 2], vec![258, 10]).is_err());
        assert!(GridGeometry::new(vec![0.0; 3], vec![1.0; 3], vec![5; 3]).is_err());
        let g = GridGeometry::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![5, 9]).unwrap();
        assert_eq!(g.len(), 45);
        assert_eq!(g.spacing(1), 0.25);
        assert_eq!(g.point(9 + 4), vec![0.25, 0.0]);
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let g = GridGeometry::new(vec![0.0, 0.0], vec![2.0, 1.0], vec![11, 7]).unwrap();
        let f = GridFunction::from_fn(&g, |x| 1.0 + x[0] + 2.0 * x[1]);
        assert!((f.integral() - (2.0 + 2.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn interpolation_reproduces_bilinear() {
        let g = GridGeometry::new(vec![-1.0, 0.0], vec![1.0, 2.0], vec![9, 5]).unwrap();
        let f = GridFunction::from_fn(&g, |x| 3.0 * x[0] - x[1] + 0.5 * x[0] * x[1]);
        let p = [0.13, 1.71];
        assert!((f.interpolate(&p) - (3.0 * 0.13 - 1.71 + 0.5 * 0.13 * 1.71)).abs() < 1e-12);
    }

    #[test]
    fn second_difference_of_parabola() {
        let g = GridGeometry::uniform_1d(-1.0, 1.0, 21).unwrap();
        let f = GridFunction::from_fn(&g, |x| 1.5 * x[0] * x[0]);
        assert!((f.max_second_difference(0) - 3.0).abs() < 1e-9);
        assert_eq!(f.second_difference(0, 0), None);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridGeometry::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![4, 3]).unwrap();
        let f = GridFunction::from_fn(&g, |x| x[0] * 10.0 + x[1]);
        let p = dir.path().join("g.csv");
        f.write_csv(&p).unwrap();
        let back = GridFunction::read_csv(&p).unwrap();
        assert_eq!(back.geometry.n_points, vec![4, 3]);
        assert!(back.max_abs_diff(&f) < 1e-15);
    }

    #[test]
    fn binary_rejects_garbage() {
        assert!(GridFunction::from_bytes(b"nope").is_err());
        let g = GridGeometry::uniform_1d(0.0, 1.0, 3).unwrap();
        let mut bytes = GridFunction::from_fn(&g, |x| x[0]).to_bytes();
        bytes.pop();
        assert!(GridFunction::from_bytes(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn binary_round_trip(n0 in 3usize..20, n1 in 3usize..20, lo in -5.0f64..0.0, w in 0.1f64..5.0, two_d: bool, seed in 0u64..1000) {
            let g = if two_d {
                GridGeometry::new(vec![lo, lo], vec![lo + w, lo + 2.0 * w], vec![n0, n1]).unwrap()
            } else {
                GridGeometry::uniform_1d(lo, lo + w, n0).unwrap()
            };
            let f = GridFunction::from_fn(&g, |x| (x.iter().sum::<f64>() * seed as f64).sin());
            let back = GridFunction::from_bytes(&f.to_bytes()).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
