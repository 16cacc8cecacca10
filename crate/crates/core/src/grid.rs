//! Uniform box grids and functions sampled on them.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::polytope::LatticePolytope;

/// Node-inclusive uniform grid on `∏ [low_a, high_a]`, row-major with the last
/// axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    low: Vec<f64>,
    high: Vec<f64>,
    res: Vec<usize>,
}

impl Grid {
    pub fn new(low: Vec<f64>, high: Vec<f64>, res: Vec<usize>) -> Result<Self> {
        let n = low.len();
        if n == 0 || n > 2 || high.len() != n || res.len() != n {
            return Err(Error::InvalidArgument("grid needs matching axes of dimension 1 or 2".into()));
        }
        for a in 0..n {
            if !(low[a].is_finite() && high[a].is_finite() && low[a] < high[a]) {
                return Err(Error::InvalidArgument(format!("grid axis {a}: empty range")));
            }
            if res[a] < 2 {
                return Err(Error::InvalidArgument(format!("grid axis {a}: need at least 2 nodes")));
            }
        }
        Ok(Self { low, high, res })
    }

    pub fn uniform(low: &[f64], high: &[f64], res: usize) -> Result<Self> {
        Self::new(low.to_vec(), high.to_vec(), vec![res; low.len()])
    }

    /// Grid on the bounding box of a polytope.
    pub fn on_polytope(p: &LatticePolytope, res: usize) -> Result<Self> {
        let (lo, hi) = p.bounding_box_f64();
        Self::uniform(&lo, &hi, res)
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn res(&self) -> &[usize] {
        &self.res
    }

    pub fn len(&self) -> usize {
        self.res.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, a: usize) -> f64 {
        (self.high[a] - self.low[a]) / (self.res[a] - 1) as f64
    }

    pub fn coord(&self, a: usize, i: usize) -> f64 {
        if i + 1 == self.res[a] {
            self.high[a]
        } else {
            self.low[a] + i as f64 * self.spacing(a)
        }
    }

    pub fn axis(&self, a: usize) -> Vec<f64> {
        (0..self.res[a]).map(|i| self.coord(a, i)).collect()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        match self.dim() {
            1 => vec![flat],
            _ => vec![flat / self.res[1], flat % self.res[1]],
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        match self.dim() {
            1 => idx[0],
            _ => idx[0] * self.res[1] + idx[1],
        }
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.coord(a, i))
            .collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(a, v)| v.clamp(self.low[a], self.high[a]))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(a, v)| *v >= self.low[a] && *v <= self.high[a])
    }

    /// Cell index and fractional offset along axis `a` for an in-box coordinate.
    fn locate(&self, a: usize, v: f64) -> (usize, f64) {
        let h = self.spacing(a);
        let t = ((v - self.low[a]) / h).max(0.0);
        let i = (t.floor() as usize).min(self.res[a] - 2);
        (i, (t - i as f64).clamp(0.0, 1.0))
    }
}

/// Values on a grid with an optional asymptote `h_P` used to extend the
/// function affinely outside the box: `f(x) = f(clamp x) + h_P(x − clamp x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    asymptote: Option<LatticePolytope>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, asymptote: Option<LatticePolytope>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid function values"));
        }
        if let Some(p) = &asymptote {
            if p.dim() != grid.dim() {
                return Err(Error::DimensionMismatch {
                    expected: grid.dim(),
                    got: p.dim(),
                });
            }
        }
        Ok(Self {
            grid,
            values,
            asymptote,
        })
    }

    pub fn sample<F: Fn(&[f64]) -> f64>(grid: Grid, f: F, asymptote: Option<LatticePolytope>) -> Result<Self> {
        let values = grid.nodes().map(|x| f(&x)).collect();
        Self::new(grid, values, asymptote)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn asymptote(&self) -> Option<&LatticePolytope> {
        self.asymptote.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn map_values<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            asymptote: self.asymptote.clone(),
        }
    }

    /// Multilinear interpolation inside the box, affine extension outside.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let c = self.grid.clamp(x);
        let inner = self.interp(&c);
        match &self.asymptote {
            Some(p) if !self.grid.contains(x) => {
                let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
                inner + p.support_function(&d)
            }
            _ => inner,
        }
    }

    fn interp(&self, c: &[f64]) -> f64 {
        let g = &self.grid;
        match g.dim() {
            1 => {
                let (i, t) = g.locate(0, c[0]);
                self.values[i] * (1.0 - t) + self.values[i + 1] * t
            }
            _ => {
                let (i, s) = g.locate(0, c[0]);
                let (j, t) = g.locate(1, c[1]);
                let v = |a: usize, b: usize| self.values[g.flat_index(&[a, b])];
                (1.0 - s) * ((1.0 - t) * v(i, j) + t * v(i, j + 1))
                    + s * ((1.0 - t) * v(i + 1, j) + t * v(i + 1, j + 1))
            }
        }
    }

    /// One-sided gradient of the interpolant (right-continuous in each cell);
    /// outside the box, the support vertex of the asymptote on the escaping
    /// axes.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let c = g.clamp(x);
        let mut out = vec![0.0; g.dim()];
        for (a, o) in out.iter_mut().enumerate() {
            let h = g.spacing(a);
            let (i, _) = g.locate(a, c[a]);
            let mut lo = c.clone();
            let mut hi = c.clone();
            lo[a] = g.coord(a, i);
            hi[a] = g.coord(a, i + 1);
            *o = (self.interp(&hi) - self.interp(&lo)) / h;
        }
        if let (Some(p), false) = (&self.asymptote, g.contains(x)) {
            let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
            let v = p.vertices_f64()[p.support_vertex(&d)].clone();
            for a in 0..g.dim() {
                if d[a] != 0.0 {
                    out[a] = v[a];
                }
            }
        }
        out
    }

    /// Maximum over nodes of `|f − g|` on this function's grid.
    pub fn sup_distance<F: Fn(&[f64]) -> f64>(&self, other: F) -> f64 {
        self.grid
            .nodes()
            .zip(&self.values)
            .map(|(x, v)| (v - other(&x)).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with axis headers: `x0[,x1],value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for a in 0..self.dim() {
            let _ = write!(s, "x{a},");
        }
        s.push_str("value\n");
        for (x, v) in self.grid.nodes().zip(&self.values) {
            for c in &x {
                let _ = write!(s, "{c:.16e},");
            }
            let _ = writeln!(s, "{v:.16e}");
        }
        s
    }

    /// True when every grid line of values has nondecreasing first
    /// differences, up to `tol` (relative to the value scale).
    pub fn is_convex_along_lines(&self, tol: f64) -> bool {
        let g = &self.grid;
        let scale = self.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let check = |line: &[f64]| {
            line.windows(3)
                .all(|w| w[2] - 2.0 * w[1] + w[0] >= -tol * scale)
        };
        match g.dim() {
            1 => check(&self.values),
            _ => {
                let (r0, r1) = (g.res()[0], g.res()[1]);
                let rows = (0..r0).all(|i| check(&self.values[i * r1..(i + 1) * r1]));
                let cols = (0..r1).all(|j| {
                    let col: Vec<f64> = (0..r0).map(|i| self.values[i * r1 + j]).collect();
                    check(&col)
                });
                rows && cols
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_endpoints_exact() {
        let g = Grid::uniform(&[-12.0], &[12.0], 4097).unwrap();
        assert_eq!(g.coord(0, 0), -12.0);
        assert_eq!(g.coord(0, 2048), 0.0);
        assert_eq!(g.coord(0, 4096), 12.0);
    }

    #[test]
    fn interpolation_reproduces_bilinear() {
        let g = Grid::uniform(&[0.0, -1.0], &[2.0, 1.0], 5).unwrap();
        let f = GridFunction::sample(g, |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1], None).unwrap();
        for &(a, b) in &[(0.3, 0.2), (1.7, -0.9), (2.0, 1.0)] {
            let exact = 1.0 + 2.0 * a - b + 0.5 * a * b;
            assert!((f.eval(&[a, b]) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_extension_outside_box() {
        let g = Grid::uniform(&[-1.0], &[1.0], 3).unwrap();
        let p = LatticePolytope::unit_interval();
        let f = GridFunction::sample(g, |x| x[0].max(0.0), Some(p)).unwrap();
        assert_eq!(f.eval(&[5.0]), 5.0);
        assert_eq!(f.eval(&[-5.0]), 0.0);
        assert_eq!(f.gradient(&[5.0]), vec![1.0]);
    }
}
