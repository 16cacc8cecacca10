//! Finitely supported probability measures on `ℝⁿ`.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Probability measure `Σ w_i δ_{x_i}` with points stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Validates, merges repeated atoms (first occurrence keeps its slot) and
    /// renormalizes so that the sequential sum of the weights is exactly 1.
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        if points.len() != dim * weights.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * weights.len(),
                got: points.len(),
            });
        }
        if weights.is_empty() {
            return Err(Error::Empty("measure"));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("measure atoms"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidMeasure("weights must be positive and finite".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }

        let n = weights.len();
        let mut order: Vec<usize> = (0..n).collect();
        let row = |i: usize| &points[i * dim..(i + 1) * dim];
        order.sort_by(|&a, &b| {
            row(a)
                .iter()
                .zip(row(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut owner = vec![usize::MAX; n];
        for w in order.windows(2) {
            let (a, b) = (w[0], w[1]);
            if row(a) == row(b) {
                owner[b] = if owner[a] == usize::MAX { a } else { owner[a] };
            }
        }
        let mut merged_w = weights.clone();
        for i in 0..n {
            if owner[i] != usize::MAX {
                merged_w[owner[i]] += weights[i];
            }
        }
        let mut pts = Vec::with_capacity(points.len());
        let mut ws = Vec::with_capacity(n);
        for i in 0..n {
            if owner[i] == usize::MAX {
                pts.extend_from_slice(row(i));
                ws.push(merged_w[i]);
            }
        }
        normalize_exact(&mut ws);
        Ok(Self {
            dim,
            points: pts,
            weights: ws,
        })
    }

    /// Equal weights on the given atoms (repeated atoms are merged).
    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::Empty("uniform measure"));
        }
        let n = points.len() / dim;
        Self::new(dim, points, vec![1.0 / n as f64; n])
    }

    /// Empirical measure `(1/N) Σ δ_{x_i}` of a list of points.
    pub fn empirical(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or(Error::Empty("point list"))?;
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        Self::uniform(dim, points.concat())
    }

    pub fn dirac(point: &[f64]) -> Result<Self> {
        Self::new(point.len(), point.to_vec(), vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// True when all weights equal `1/len` up to the rounding absorbed by
    /// exact normalization.
    pub fn is_uniform(&self) -> bool {
        let n = self.len() as f64;
        let w0 = 1.0 / n;
        self.weights.iter().all(|w| (w - w0).abs() <= 4.0 * n * f64::EPSILON)
    }

    /// `∫ |x| dμ`.
    pub fn first_moment(&self) -> f64 {
        self.points()
            .zip(&self.weights)
            .map(|(p, w)| w * norm(p))
            .sum()
    }

    /// `max_i |x_i|`, the essential supremum of `|x|`.
    pub fn max_norm(&self) -> f64 {
        self.points().map(norm).fold(0.0, f64::max)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (p, w) in self.points().zip(&self.weights) {
            for (a, b) in m.iter_mut().zip(p) {
                *a += w * b;
            }
        }
        m
    }

    pub fn translate(&self, t: &[f64]) -> Result<Self> {
        if t.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: t.len(),
            });
        }
        let pts = self
            .points
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(t).map(|(a, b)| a + b))
            .collect();
        Self::new(self.dim, pts, self.weights.clone())
    }

    /// Pushforward under a map of points.
    pub fn map<F: Fn(&[f64]) -> Vec<f64>>(&self, f: F) -> Result<Self> {
        let pts: Vec<f64> = self.points().flat_map(f).collect();
        let dim = pts.len() / self.len();
        Self::new(dim, pts, self.weights.clone())
    }

    /// Atoms sorted by coordinate (1-D only), weights alongside.
    pub fn sorted_1d(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.dim != 1 {
            return Err(Error::Unsupported("sorted_1d requires dimension 1".into()));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.points[a].total_cmp(&self.points[b]));
        Ok((
            idx.iter().map(|&i| self.points[i]).collect(),
            idx.iter().map(|&i| self.weights[i]).collect(),
        ))
    }

    /// CSV with columns `x0,..,x{n-1},weight`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for a in 0..self.dim {
            let _ = write!(s, "x{a},");
        }
        s.push_str("weight\n");
        for (p, w) in self.points().zip(&self.weights) {
            for v in p {
                let _ = write!(s, "{v:.16e},");
            }
            let _ = writeln!(s, "{w:.16e}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(Error::Empty("measure csv"))?;
        let cols = header.split(',').count();
        if cols < 2 {
            return Err(Error::InvalidMeasure("csv needs coordinate and weight columns".into()));
        }
        let dim = cols - 1;
        let mut pts = Vec::new();
        let mut ws = Vec::new();
        for (ln, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidMeasure(format!("row {}: {e}", ln + 2)))?;
            if vals.len() != cols {
                return Err(Error::InvalidMeasure(format!("row {}: expected {cols} fields", ln + 2)));
            }
            pts.extend_from_slice(&vals[..dim]);
            ws.push(vals[dim]);
        }
        Self::new(dim, pts, ws)
    }
}

pub(crate) fn norm(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rescales positive weights so their left-to-right floating-point sum is
/// exactly `1.0`, absorbing the rounding into the last weight.
pub(crate) fn normalize_exact(w: &mut [f64]) {
    let total: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= total;
    }
    let n = w.len();
    for _ in 0..8 {
        let head: f64 = w[..n - 1].iter().sum();
        let s = head + w[n - 1];
        if s == 1.0 {
            return;
        }
        w[n - 1] = 1.0 - head;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn merges_duplicates() {
        let m = DiscreteMeasure::uniform(1, vec![0.5, 0.0, 0.5, 1.0]).unwrap();
        assert_eq!(m.points_flat(), &[0.5, 0.0, 1.0]);
        assert_eq!(m.weights(), &[0.5, 0.25, 0.25]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(DiscreteMeasure::new(1, vec![], vec![]).is_err());
        assert!(DiscreteMeasure::new(1, vec![f64::NAN], vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(1, vec![0.0, 1.0], vec![0.3, 0.3]).is_err());
        assert!(DiscreteMeasure::new(2, vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let m = DiscreteMeasure::new(2, vec![0.1, 0.2, 1.0 / 3.0, -4.5], vec![0.3, 0.7]).unwrap();
        let back = DiscreteMeasure::from_csv(&m.to_csv()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn moments() {
        let m = DiscreteMeasure::uniform(1, vec![-1.0, 3.0]).unwrap();
        assert_eq!(m.first_moment(), 2.0);
        assert_eq!(m.max_norm(), 3.0);
        assert_eq!(m.mean(), vec![1.0]);
    }

    proptest! {
        #[test]
        fn mass_is_exactly_one(n in 1usize..200, seed in 0u64..1000) {
            let pts: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed) % 1009) as f64 * 0.37).collect();
            let m = DiscreteMeasure::uniform(1, pts).unwrap();
            prop_assert_eq!(m.total_mass(), 1.0);
        }
    }
}
