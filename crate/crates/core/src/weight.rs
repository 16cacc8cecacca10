//! Toric weights: functions on `ℝⁿ` at bounded distance from a support
//! function `h_P`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::measure::dot;
use crate::polytope::{rat_to_f64, LatticePolytope, PolytopeSpec};

#[derive(Clone, Debug, PartialEq)]
pub enum WeightFamily {
    /// `h_P`.
    Support,
    /// `(1/2s) log Σ a_p e^{2s<x,p>}` over points `p ∈ P` that include every
    /// vertex.
    LogSumExp { sharpness: f64, terms: Vec<(Vec<f64>, f64)> },
    /// `sup_{q∈P} <x,q> − a|q|²/2`; conjugate `a|p|²/2` on `P`.
    QuadraticBlend { curvature: f64 },
    /// `a|x|²/2`. Not at bounded distance from `h_P`; used for convex-analysis
    /// checks where only the slopes in `P` matter.
    Quadratic { curvature: f64 },
    /// Multilinear interpolant with affine `h_P` extension.
    Grid(GridFunction),
    /// Pointwise sum; the polytope is the Minkowski sum of the terms.
    Sum(Vec<ToricWeight>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToricWeight {
    polytope: LatticePolytope,
    family: WeightFamily,
    shift: f64,
}

impl ToricWeight {
    pub fn support(polytope: LatticePolytope) -> Self {
        Self {
            polytope,
            family: WeightFamily::Support,
            shift: 0.0,
        }
    }

    pub fn log_sum_exp(polytope: LatticePolytope, sharpness: f64, terms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if !(sharpness.is_finite() && sharpness > 0.0) {
            return Err(Error::InvalidArgument("sharpness must be positive".into()));
        }
        for (p, a) in &terms {
            if p.len() != polytope.dim() {
                return Err(Error::DimensionMismatch {
                    expected: polytope.dim(),
                    got: p.len(),
                });
            }
            if !(a.is_finite() && *a > 0.0) {
                return Err(Error::InvalidArgument("log-sum-exp coefficients must be positive".into()));
            }
            if !polytope.contains(p, 1e-12) {
                return Err(Error::InvalidArgument(format!("log-sum-exp point {p:?} outside P")));
            }
        }
        for v in polytope.vertices_f64() {
            if !terms.iter().any(|(p, _)| p.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-12)) {
                return Err(Error::InvalidArgument(format!(
                    "log-sum-exp terms must include every vertex of P (missing {v:?})"
                )));
            }
        }
        Ok(Self {
            polytope,
            family: WeightFamily::LogSumExp { sharpness, terms },
            shift: 0.0,
        })
    }

    /// Log-sum-exp over the lattice points of `P` with unit coefficients.
    pub fn lattice_log_sum_exp(polytope: LatticePolytope, sharpness: f64) -> Result<Self> {
        let terms = polytope
            .lattice_points(1)
            .into_iter()
            .map(|p| (p.into_iter().map(|c| c as f64).collect(), 1.0))
            .collect();
        Self::log_sum_exp(polytope, sharpness, terms)
    }

    /// `(1/2) log(1 + e^{2x})` on `[0, 1]`.
    pub fn logistic() -> Self {
        Self::lattice_log_sum_exp(LatticePolytope::unit_interval(), 1.0).expect("logistic weight")
    }

    pub fn quadratic_blend(polytope: LatticePolytope, curvature: f64) -> Result<Self> {
        if !(curvature.is_finite() && curvature > 0.0) {
            return Err(Error::InvalidArgument("curvature must be positive".into()));
        }
        Ok(Self {
            polytope,
            family: WeightFamily::QuadraticBlend { curvature },
            shift: 0.0,
        })
    }

    pub fn quadratic(polytope: LatticePolytope, curvature: f64) -> Result<Self> {
        if !(curvature.is_finite() && curvature > 0.0) {
            return Err(Error::InvalidArgument("curvature must be positive".into()));
        }
        Ok(Self {
            polytope,
            family: WeightFamily::Quadratic { curvature },
            shift: 0.0,
        })
    }

    pub fn grid(polytope: LatticePolytope, f: GridFunction) -> Result<Self> {
        if f.dim() != polytope.dim() {
            return Err(Error::DimensionMismatch {
                expected: polytope.dim(),
                got: f.dim(),
            });
        }
        let f = GridFunction::new(f.grid().clone(), f.values().to_vec(), Some(polytope.clone()))?;
        Ok(Self {
            polytope,
            family: WeightFamily::Grid(f),
            shift: 0.0,
        })
    }

    pub fn sum(terms: Vec<ToricWeight>) -> Result<Self> {
        let mut it = terms.iter();
        let first = it.next().ok_or(Error::Empty("weight sum"))?;
        let mut poly = first.polytope.clone();
        for t in it {
            poly = poly.minkowski_sum(&t.polytope)?;
        }
        Ok(Self {
            polytope: poly,
            family: WeightFamily::Sum(terms),
            shift: 0.0,
        })
    }

    pub fn with_shift(mut self, c: f64) -> Self {
        self.shift += c;
        self
    }

    pub fn polytope(&self) -> &LatticePolytope {
        &self.polytope
    }

    pub fn family(&self) -> &WeightFamily {
        &self.family
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn dim(&self) -> usize {
        self.polytope.dim()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.shift
            + match &self.family {
                WeightFamily::Support => self.polytope.support_function(x),
                WeightFamily::LogSumExp { sharpness, terms } => {
                    let s = *sharpness;
                    let exps: Vec<f64> = terms.iter().map(|(p, a)| 2.0 * s * dot(x, p) + a.ln()).collect();
                    let m = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let tot: f64 = exps.iter().map(|e| (e - m).exp()).sum();
                    (m + tot.ln()) / (2.0 * s)
                }
                WeightFamily::QuadraticBlend { curvature } => {
                    let q = self.blend_point(x, *curvature);
                    dot(x, &q) - 0.5 * curvature * dot(&q, &q)
                }
                WeightFamily::Quadratic { curvature } => 0.5 * curvature * dot(x, x),
                WeightFamily::Grid(f) => f.eval(x),
                WeightFamily::Sum(ts) => ts.iter().map(|t| t.value(x)).sum(),
            }
    }

    /// Gradient; at kinks of `support` the lexicographically first maximizing
    /// vertex.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.family {
            WeightFamily::Support => self.polytope.vertices_f64()[self.polytope.support_vertex(x)].clone(),
            WeightFamily::LogSumExp { sharpness, terms } => {
                let w = lse_weights(x, *sharpness, terms);
                let mut g = vec![0.0; x.len()];
                for ((p, _), wi) in terms.iter().zip(&w) {
                    for (ga, pa) in g.iter_mut().zip(p) {
                        *ga += wi * pa;
                    }
                }
                g
            }
            WeightFamily::QuadraticBlend { curvature } => self.blend_point(x, *curvature),
            WeightFamily::Quadratic { curvature } => x.iter().map(|v| curvature * v).collect(),
            WeightFamily::Grid(f) => f.gradient(x),
            WeightFamily::Sum(ts) => {
                let mut g = vec![0.0; x.len()];
                for t in ts {
                    for (a, b) in g.iter_mut().zip(t.gradient(x)) {
                        *a += b;
                    }
                }
                g
            }
        }
    }

    /// Row-major Hessian for the smooth families; `None` for piecewise-linear
    /// ones.
    pub fn hessian(&self, x: &[f64]) -> Option<Vec<f64>> {
        let n = x.len();
        match &self.family {
            WeightFamily::Support | WeightFamily::Grid(_) => None,
            WeightFamily::LogSumExp { sharpness, terms } => {
                let w = lse_weights(x, *sharpness, terms);
                let mut mean = vec![0.0; n];
                for ((p, _), wi) in terms.iter().zip(&w) {
                    for (m, pa) in mean.iter_mut().zip(p) {
                        *m += wi * pa;
                    }
                }
                let mut h = vec![0.0; n * n];
                for ((p, _), wi) in terms.iter().zip(&w) {
                    for a in 0..n {
                        for b in 0..n {
                            h[a * n + b] += wi * (p[a] - mean[a]) * (p[b] - mean[b]);
                        }
                    }
                }
                Some(h.into_iter().map(|v| 2.0 * sharpness * v).collect())
            }
            WeightFamily::QuadraticBlend { curvature } => {
                let y: Vec<f64> = x.iter().map(|v| v / curvature).collect();
                let mut h = vec![0.0; n * n];
                if self.polytope.contains(&y, 0.0) {
                    for a in 0..n {
                        h[a * n + a] = 1.0 / curvature;
                    }
                } else if n == 2 {
                    let q = project_polygon(&self.polytope, &y);
                    if let Some(t) = active_edge_direction(&self.polytope, &q) {
                        for a in 0..2 {
                            for b in 0..2 {
                                h[a * 2 + b] = t[a] * t[b] / curvature;
                            }
                        }
                    }
                }
                Some(h)
            }
            WeightFamily::Quadratic { curvature } => {
                let mut h = vec![0.0; n * n];
                for a in 0..n {
                    h[a * n + a] = *curvature;
                }
                Some(h)
            }
            WeightFamily::Sum(ts) => {
                let mut h = vec![0.0; n * n];
                for t in ts {
                    for (a, b) in h.iter_mut().zip(t.hessian(x)?) {
                        *a += b;
                    }
                }
                Some(h)
            }
        }
    }

    /// A constant `C` with `|φ − h_P| ≤ C` everywhere, or `None` when the
    /// family is not at bounded distance from `h_P`.
    pub fn growth_constant(&self) -> Option<f64> {
        let inner = match &self.family {
            WeightFamily::Support => 0.0,
            WeightFamily::LogSumExp { sharpness, terms } => {
                let total: f64 = terms.iter().map(|(_, a)| a).sum();
                let verts = self.polytope.vertices_f64();
                let min_vertex = terms
                    .iter()
                    .filter(|(p, _)| verts.iter().any(|v| v.iter().zip(p).all(|(a, b)| (a - b).abs() < 1e-12)))
                    .map(|(_, a)| *a)
                    .fold(f64::INFINITY, f64::min);
                let s2 = 2.0 * sharpness;
                (total.ln() / s2).abs().max((min_vertex.ln() / s2).abs())
            }
            WeightFamily::QuadraticBlend { curvature } => {
                let r2 = self
                    .polytope
                    .vertices_f64()
                    .iter()
                    .map(|v| dot(v, v))
                    .fold(0.0, f64::max);
                0.5 * curvature * r2
            }
            WeightFamily::Quadratic { .. } => return None,
            WeightFamily::Grid(f) => f.sup_distance(|x| self.polytope.support_function(x)),
            WeightFamily::Sum(ts) => {
                let mut c = 0.0;
                for t in ts {
                    c += t.growth_constant()?;
                }
                c
            }
        };
        Some(inner + self.shift.abs())
    }

    /// Box `[−B, B]ⁿ` outside which the equilibrium measure has negligible
    /// mass (below about `1e-10` for the log-sum-exp family).
    pub fn suggested_half_width(&self) -> f64 {
        let r = self
            .polytope
            .vertices_f64()
            .iter()
            .map(|v| dot(v, v).sqrt())
            .fold(0.0, f64::max);
        match &self.family {
            WeightFamily::Support => 1.0,
            WeightFamily::LogSumExp { sharpness, .. } => 12.0 / sharpness.min(1.0),
            WeightFamily::QuadraticBlend { curvature } => curvature * r + 1.0,
            WeightFamily::Quadratic { curvature } => r / curvature + 1.0,
            WeightFamily::Grid(f) => f
                .grid()
                .low()
                .iter()
                .chain(f.grid().high())
                .fold(1.0f64, |m, v| m.max(v.abs())),
            WeightFamily::Sum(ts) => ts.iter().map(|t| t.suggested_half_width()).fold(1.0, f64::max),
        }
    }

    /// Samples `φ` on a grid, keeping `h_P` as the asymptote.
    pub fn to_grid_function(&self, grid: Grid) -> Result<GridFunction> {
        GridFunction::sample(grid, |x| self.value(x), Some(self.polytope.clone()))
    }

    fn blend_point(&self, x: &[f64], a: f64) -> Vec<f64> {
        let y: Vec<f64> = x.iter().map(|v| v / a).collect();
        match self.polytope.dim() {
            1 => {
                let (lo, hi) = self.polytope.bounding_box_f64();
                vec![y[0].clamp(lo[0], hi[0])]
            }
            _ => project_polygon(&self.polytope, &y),
        }
    }
}

fn lse_weights(x: &[f64], s: f64, terms: &[(Vec<f64>, f64)]) -> Vec<f64> {
    let exps: Vec<f64> = terms.iter().map(|(p, a)| 2.0 * s * dot(x, p) + a.ln()).collect();
    let m = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = exps.iter().map(|e| (e - m).exp()).collect();
    let tot: f64 = w.iter().sum();
    w.into_iter().map(|v| v / tot).collect()
}

/// Euclidean projection onto a convex polygon.
fn project_polygon(p: &LatticePolytope, y: &[f64]) -> Vec<f64> {
    if p.contains(y, 0.0) {
        return y.to_vec();
    }
    let v = p.vertices_f64();
    let n = v.len();
    let mut best = v[0].clone();
    let mut best_d = f64::INFINITY;
    for i in 0..n {
        let a = &v[i];
        let b = &v[(i + 1) % n];
        let e = [b[0] - a[0], b[1] - a[1]];
        let t = (((y[0] - a[0]) * e[0] + (y[1] - a[1]) * e[1]) / (e[0] * e[0] + e[1] * e[1])).clamp(0.0, 1.0);
        let q = vec![a[0] + t * e[0], a[1] + t * e[1]];
        let d = (q[0] - y[0]).powi(2) + (q[1] - y[1]).powi(2);
        if d < best_d {
            best_d = d;
            best = q;
        }
    }
    best
}

/// Unit direction of the edge whose relative interior contains `q`.
fn active_edge_direction(p: &LatticePolytope, q: &[f64]) -> Option<[f64; 2]> {
    let v = p.vertices_f64();
    let n = v.len();
    for i in 0..n {
        let a = &v[i];
        let b = &v[(i + 1) % n];
        let e = [b[0] - a[0], b[1] - a[1]];
        let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
        let cross = (q[0] - a[0]) * e[1] - (q[1] - a[1]) * e[0];
        let t = ((q[0] - a[0]) * e[0] + (q[1] - a[1]) * e[1]) / (len * len);
        if cross.abs() <= 1e-12 * len && t > 1e-12 && t < 1.0 - 1e-12 {
            return Some([e[0] / len, e[1] / len]);
        }
    }
    None
}

/// JSON form of a weight; the polytope comes from the enclosing bundle.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSpec {
    Support {
        #[serde(default)]
        shift: f64,
    },
    #[serde(alias = "log-sum-exp")]
    Logsumexp {
        #[serde(default = "one")]
        sharpness: f64,
        /// Defaults to unit coefficients on the lattice points of `P`.
        #[serde(default)]
        coeffs: Option<Vec<CoeffSpec>>,
        #[serde(default)]
        shift: f64,
    },
    QuadraticBlend {
        curvature: f64,
        #[serde(default)]
        shift: f64,
    },
    Quadratic {
        curvature: f64,
        #[serde(default)]
        shift: f64,
    },
    #[serde(alias = "grid-interpolated")]
    Grid {
        low: Vec<f64>,
        high: Vec<f64>,
        res: Vec<usize>,
        values: Vec<f64>,
        #[serde(default)]
        shift: f64,
    },
    Sum {
        terms: Vec<TermSpec>,
        #[serde(default)]
        shift: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CoeffSpec {
    pub point: Vec<f64>,
    pub coeff: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub polytope: PolytopeSpec,
    pub weight: WeightSpec,
}

impl WeightSpec {
    pub fn build(&self, polytope: &LatticePolytope) -> Result<ToricWeight> {
        let (w, shift) = match self {
            WeightSpec::Support { shift } => (ToricWeight::support(polytope.clone()), *shift),
            WeightSpec::Logsumexp { sharpness, coeffs, shift } => {
                let w = match coeffs {
                    None => ToricWeight::lattice_log_sum_exp(polytope.clone(), *sharpness)?,
                    Some(cs) => ToricWeight::log_sum_exp(
                        polytope.clone(),
                        *sharpness,
                        cs.iter().map(|c| (c.point.clone(), c.coeff)).collect(),
                    )?,
                };
                (w, *shift)
            }
            WeightSpec::QuadraticBlend { curvature, shift } => {
                (ToricWeight::quadratic_blend(polytope.clone(), *curvature)?, *shift)
            }
            WeightSpec::Quadratic { curvature, shift } => (ToricWeight::quadratic(polytope.clone(), *curvature)?, *shift),
            WeightSpec::Grid { low, high, res, values, shift } => {
                let g = Grid::new(low.clone(), high.clone(), res.clone())?;
                let f = GridFunction::new(g, values.clone(), None)?;
                (ToricWeight::grid(polytope.clone(), f)?, *shift)
            }
            WeightSpec::Sum { terms, shift } => {
                let ts = terms
                    .iter()
                    .map(|t| t.weight.build(&t.polytope.build()?))
                    .collect::<Result<Vec<_>>>()?;
                let w = ToricWeight::sum(ts)?;
                if w.polytope() != polytope {
                    return Err(Error::InvalidPolytope(
                        "sum weight: bundle polytope must be the Minkowski sum of the terms".into(),
                    ));
                }
                (w, *shift)
            }
        };
        Ok(w.with_shift(shift))
    }
}

/// Largest `|φ − h_P|` over the nodes of a grid; the testable surrogate for
/// the growth condition.
pub fn growth_on_grid(w: &ToricWeight, grid: &Grid) -> f64 {
    grid.nodes()
        .map(|x| (w.value(&x) - w.polytope().support_function(&x)).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn vertex_range_1d(p: &LatticePolytope) -> (f64, f64) {
    let v = p.vertices();
    (rat_to_f64(&v[0][0]), rat_to_f64(&v[1][0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(w: &ToricWeight, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|a| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[a] += h;
                xm[a] -= h;
                (w.value(&xp) - w.value(&xm)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn logistic_closed_form() {
        let w = ToricWeight::logistic();
        for &x in &[-30.0f64, -1.0, 0.0, 0.7, 25.0] {
            let exact = 0.5 * (1.0f64 + (2.0 * x).exp()).ln();
            let stable = if x > 0.0 { x + 0.5 * (1.0 + (-2.0 * x).exp()).ln() } else { exact };
            assert!((w.value(&[x]) - stable).abs() < 1e-14);
        }
        assert!((w.growth_constant().unwrap() - 0.5 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let tri = LatticePolytope::from_integer_vertices(2, &[vec![0, 0], vec![2, 0], vec![0, 2]]).unwrap();
        let ws = vec![
            ToricWeight::lattice_log_sum_exp(tri.clone(), 0.7).unwrap(),
            ToricWeight::quadratic_blend(tri.clone(), 1.3).unwrap(),
            ToricWeight::sum(vec![ToricWeight::logistic(), ToricWeight::logistic()]).unwrap(),
        ];
        for w in &ws {
            let pts: Vec<Vec<f64>> = if w.dim() == 2 {
                vec![vec![0.3, -0.4], vec![1.1, 0.9], vec![-2.0, 0.5]]
            } else {
                vec![vec![0.3], vec![-1.2]]
            };
            for x in pts {
                let g = w.gradient(&x);
                let f = fd_grad(w, &x);
                for (a, b) in g.iter().zip(&f) {
                    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn blend_is_projection_of_quadratic() {
        let w = ToricWeight::quadratic_blend(LatticePolytope::integer_interval(-1, 1).unwrap(), 1.0).unwrap();
        assert_eq!(w.value(&[0.5]), 0.125);
        assert_eq!(w.value(&[3.0]), 2.5);
        assert_eq!(w.value(&[-3.0]), 2.5);
    }

    #[test]
    fn growth_bound_holds_on_grid() {
        let w = ToricWeight::logistic();
        let g = Grid::uniform(&[-20.0], &[20.0], 2001).unwrap();
        assert!(growth_on_grid(&w, &g) <= w.growth_constant().unwrap() + 1e-15);
    }

    #[test]
    fn spec_json() {
        let s: WeightSpec = serde_json::from_str(r#"{"family":"logsumexp","sharpness":1}"#).unwrap();
        let w = s.build(&LatticePolytope::unit_interval()).unwrap();
        assert_eq!(w, ToricWeight::logistic());
        let bad = serde_json::from_str::<WeightSpec>(r#"{"family":"nope"}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn missing_vertex_rejected() {
        let r = ToricWeight::log_sum_exp(LatticePolytope::unit_interval(), 1.0, vec![(vec![0.0], 1.0)]);
        assert!(r.is_err());
    }
}
