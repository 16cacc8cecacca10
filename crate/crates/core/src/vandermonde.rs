//! Weighted Vandermonde determinants `|D|²_φ` in logarithmic torus
//! coordinates, their gradients, and the product objective.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::linalg::{lu, C64};
use crate::measure::{dot, DiscreteMeasure};
use crate::polytope::{LatticeBasis, LatticePolytope, Rational};
use crate::weight::ToricWeight;

/// Points `w_i = x_i + √−1 y_i` with angles reduced to `[0, 2π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    dim: usize,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
}

fn reduce_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl Configuration {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> Result<Self> {
        let dim = x.first().map(Vec::len).ok_or(Error::Empty("configuration"))?;
        if dim == 0 {
            return Err(Error::Empty("configuration dimension"));
        }
        if y.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        for v in x.iter().chain(&y) {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("configuration"));
            }
        }
        let y = y.into_iter().map(|v| v.into_iter().map(reduce_angle).collect()).collect();
        Ok(Self { dim, x, y })
    }

    /// Flat layout used by the optimizer: all `x` coordinates, then all `y`.
    pub fn from_flat(dim: usize, v: &[f64]) -> Result<Self> {
        let n = v.len() / (2 * dim);
        let x = (0..n).map(|i| v[i * dim..(i + 1) * dim].to_vec()).collect();
        let y = (0..n).map(|i| v[(n + i) * dim..(n + i + 1) * dim].to_vec()).collect();
        Self::new(x, y)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).flatten().copied().collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[Vec<f64>] {
        &self.y
    }

    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        Self::new(
            perm.iter().map(|&i| self.x[i].clone()).collect(),
            perm.iter().map(|&i| self.y[i].clone()).collect(),
        )
    }

    pub fn rotated(&self, angle: &[f64]) -> Result<Self> {
        Self::new(
            self.x.clone(),
            self.y
                .iter()
                .map(|v| v.iter().zip(angle).map(|(a, b)| a + b).collect())
                .collect(),
        )
    }

    /// Empirical measure `δ^N` of the first `n` real parts.
    pub fn empirical(&self, n: usize) -> Result<DiscreteMeasure> {
        if n == 0 || n > self.len() {
            return Err(Error::InsufficientPoints {
                needed: n.max(1),
                got: self.len(),
            });
        }
        DiscreteMeasure::empirical(&self.x[..n])
    }

    /// Largest circular gap-complement of the angles per axis: the length of
    /// the shortest arc containing all of them.
    pub fn angle_spread(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|a| {
                let mut t: Vec<f64> = self.y.iter().map(|v| v[a]).collect();
                t.sort_by(f64::total_cmp);
                let n = t.len();
                let mut gap = TAU - (t[n - 1] - t[0]);
                for w in t.windows(2) {
                    gap = gap.max(w[1] - w[0]);
                }
                TAU - gap
            })
            .collect()
    }

    /// CSV rows `x0..,y0..` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let hx: Vec<String> = (0..self.dim).map(|a| format!("x{a}")).collect();
        let hy: Vec<String> = (0..self.dim).map(|a| format!("y{a}")).collect();
        let _ = writeln!(s, "{},{}", hx.join(","), hy.join(","));
        for (x, y) in self.x.iter().zip(&self.y) {
            let row: Vec<String> = x.iter().chain(y).map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(Error::Empty("configuration csv"))?;
        let cols = header.split(',').count();
        if cols % 2 != 0 {
            return Err(Error::InvalidArgument("configuration csv needs x and y columns".into()));
        }
        let dim = cols / 2;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (ln, line) in lines.enumerate() {
            let v: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidArgument(format!("configuration csv row {}: {e}", ln + 2)))?;
            if v.len() != cols {
                return Err(Error::InvalidArgument(format!("configuration csv row {}: expected {cols} fields", ln + 2)));
            }
            x.push(v[..dim].to_vec());
            y.push(v[dim..].to_vec());
        }
        Self::new(x, y)
    }
}

/// A bundle `(L_j, φ_j)`: lattice polytope, weight with asymptote `h_P`,
/// level multiplier `λ` (sections of level `k` are the lattice points of
/// `⌊kλ⌋P`) and volume constant `c`.
#[derive(Clone, Debug)]
pub struct BundleSpec {
    pub polytope: LatticePolytope,
    pub weight: ToricWeight,
    pub scale: Rational,
    pub c: f64,
}

impl BundleSpec {
    /// `λ = 1/c` with `c = Leb(P)^{1/n}`, so that `⌊kλ⌋P` has volume about
    /// `kⁿ`.
    pub fn normalized(weight: ToricWeight) -> Result<Self> {
        let polytope = weight.polytope().clone();
        let (_, c) = polytope.normalize_volume()?;
        let scale = match polytope.dim() {
            1 => polytope.volume().recip(),
            _ => Rational::approximate_float(1.0 / c)
                .ok_or_else(|| Error::InvalidPolytope("volume scale not representable".into()))?,
        };
        Ok(Self {
            polytope,
            weight,
            scale,
            c,
        })
    }

    pub fn basis(&self, k: u32) -> Result<LatticeBasis> {
        LatticeBasis::new(&self.polytope, k, self.scale)
    }

    pub fn lambda(&self) -> f64 {
        self.scale.to_f64().unwrap_or(f64::NAN)
    }
}

fn validate(config: &Configuration, basis: &LatticeBasis, phi: &ToricWeight) -> Result<usize> {
    let n = basis.len();
    if n == 0 {
        return Err(Error::Empty("lattice basis"));
    }
    if config.len() < n {
        return Err(Error::InsufficientPoints {
            needed: n,
            got: config.len(),
        });
    }
    if config.dim() != phi.dim() || basis.dim() != phi.dim() {
        return Err(Error::DimensionMismatch {
            expected: phi.dim(),
            got: config.dim(),
        });
    }
    Ok(n)
}

/// Row-scaled matrix `e^{<w_i, p_l> − s_i}` for the first `n` points.
fn matrix(config: &Configuration, basis: &LatticeBasis, shifts: &[f64]) -> Vec<C64> {
    let n = basis.len();
    let mut m = Vec::with_capacity(n * n);
    for ((x, y), s) in config.x.iter().zip(&config.y).zip(shifts).take(n) {
        for p in &basis.points {
            let pf: Vec<f64> = p.iter().map(|&c| c as f64).collect();
            let re = dot(x, &pf) - s;
            let im = dot(y, &pf);
            m.push(C64::from_polar(re.exp(), im));
        }
    }
    m
}

fn h_shifts(config: &Configuration, basis: &LatticeBasis, phi: &ToricWeight) -> Vec<f64> {
    let d = basis.dilation as f64;
    (0..basis.len())
        .map(|i| d * phi.polytope().support_function(&config.x[i]))
        .collect()
}

/// `log |D|²_φ = 2(Σ d·h_P(x_i) + log|det M|) − 2d Σ φ(x_i)` over the first
/// `N = |B|` points, `d = ⌊kλ⌋`; `-inf` for a numerically singular matrix.
pub fn log_vd(config: &Configuration, basis: &LatticeBasis, phi: &ToricWeight) -> Result<f64> {
    validate(config, basis, phi)?;
    let s = h_shifts(config, basis, phi);
    log_vd_with_shifts(config, basis, phi, &s)
}

/// [`log_vd`] with arbitrary finite per-row scalings `e^{−s_i}`; the result
/// does not depend on them.
pub fn log_vd_with_shifts(config: &Configuration, basis: &LatticeBasis, phi: &ToricWeight, s: &[f64]) -> Result<f64> {
    let n = validate(config, basis, phi)?;
    if s.len() < n || s[..n].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("row scaling"));
    }
    let f = lu(matrix(config, basis, s), n);
    if f.singular {
        return Ok(f64::NEG_INFINITY);
    }
    let d = basis.dilation as f64;
    let wsum: f64 = (0..n).map(|i| phi.value(&config.x[i])).sum();
    let v = 2.0 * (s[..n].iter().sum::<f64>() + f.log_abs_det) - 2.0 * d * wsum;
    if v.is_nan() {
        return Err(Error::NonFinite("log_vd"));
    }
    Ok(v)
}

/// Gradient of [`log_vd`] in the flat `(x…, y…)` layout of the whole
/// configuration (zero for points beyond `N`).
pub fn grad_log_vd(config: &Configuration, basis: &LatticeBasis, phi: &ToricWeight) -> Result<Vec<f64>> {
    let n = validate(config, basis, phi)?;
    let dim = config.dim();
    let s = h_shifts(config, basis, phi);
    let m = matrix(config, basis, &s);
    let f = lu(m.clone(), n);
    if f.singular {
        return Err(Error::Singular);
    }
    let inv = f.inverse();
    let d = basis.dilation as f64;
    let total = config.len();
    let mut g = vec![0.0; 2 * total * dim];
    for i in 0..n {
        let mut acc = vec![C64::new(0.0, 0.0); dim];
        for (l, p) in basis.points.iter().enumerate() {
            let t = inv[l * n + i] * m[i * n + l];
            for a in 0..dim {
                acc[a] += t * p[a] as f64;
            }
        }
        let gphi = phi.gradient(&config.x[i]);
        for a in 0..dim {
            g[i * dim + a] = 2.0 * acc[a].re - 2.0 * d * gphi[a];
            g[(total + i) * dim + a] = -2.0 * acc[a].im;
        }
    }
    Ok(g)
}

/// Number of points the product objective uses: `N̂ = max_j N_j`.
pub fn n_hat(bases: &[LatticeBasis]) -> usize {
    bases.iter().map(LatticeBasis::len).max().unwrap_or(0)
}

/// `(1/(k N̂)) Σ_j c_j log |D̂_j|²_{φ_j}`; `-inf` if any factor is singular.
pub fn product_objective(config: &Configuration, bundles: &[BundleSpec], k: u32) -> Result<f64> {
    let bases = bundles.iter().map(|b| b.basis(k)).collect::<Result<Vec<_>>>()?;
    product_objective_with_bases(config, bundles, &bases, k)
}

pub fn product_objective_with_bases(
    config: &Configuration,
    bundles: &[BundleSpec],
    bases: &[LatticeBasis],
    k: u32,
) -> Result<f64> {
    if bundles.is_empty() {
        return Err(Error::Empty("bundle list"));
    }
    let nh = n_hat(bases);
    if config.len() < nh {
        return Err(Error::InsufficientPoints {
            needed: nh,
            got: config.len(),
        });
    }
    let mut total = 0.0;
    for (b, basis) in bundles.iter().zip(bases) {
        let v = log_vd(config, basis, &b.weight)?;
        if v == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        total += b.c * v;
    }
    Ok(total / (k as f64 * nh as f64))
}

/// Value and gradient of [`product_objective_with_bases`].
pub fn product_objective_grad(
    config: &Configuration,
    bundles: &[BundleSpec],
    bases: &[LatticeBasis],
    k: u32,
) -> Result<(f64, Vec<f64>)> {
    let v = product_objective_with_bases(config, bundles, bases, k)?;
    let scale = 1.0 / (k as f64 * n_hat(bases) as f64);
    let mut g = vec![0.0; 2 * config.len() * config.dim()];
    if v == f64::NEG_INFINITY {
        return Ok((v, g));
    }
    for (b, basis) in bundles.iter().zip(bases) {
        let gj = grad_log_vd(config, basis, &b.weight)?;
        for (a, c) in g.iter_mut().zip(gj) {
            *a += scale * b.c * c;
        }
    }
    Ok((v, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_bundle(w: ToricWeight) -> BundleSpec {
        BundleSpec::normalized(w).unwrap()
    }

    #[test]
    fn two_by_two_by_hand() {
        let b = unit_bundle(ToricWeight::support(LatticePolytope::unit_interval()));
        let basis = b.basis(1).unwrap();
        let c = Configuration::new(vec![vec![0.0], vec![0.0]], vec![vec![0.0], vec![PI]]).unwrap();
        let v = log_vd(&c, &basis, &b.weight).unwrap();
        assert!((v - 2.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn coincident_points_sentinel() {
        let b = unit_bundle(ToricWeight::logistic());
        let basis = b.basis(3).unwrap();
        let p = vec![0.3];
        let q = vec![1.0];
        let c = Configuration::new(vec![p.clone(), p.clone(), vec![0.1], vec![-0.4]], vec![q.clone(), q, vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(log_vd(&c, &basis, &b.weight).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn weight_shift_covariance() {
        let w = ToricWeight::logistic();
        let basis = unit_bundle(w.clone()).basis(4).unwrap();
        let c = Configuration::new(
            (0..5).map(|i| vec![i as f64 * 0.4 - 1.0]).collect(),
            (0..5).map(|i| vec![i as f64 * 1.1]).collect(),
        )
        .unwrap();
        let a = log_vd(&c, &basis, &w).unwrap();
        let b = log_vd(&c, &basis, &w.clone().with_shift(0.3)).unwrap();
        assert!((a - b - 2.0 * 4.0 * 5.0 * 0.3).abs() < 1e-10);
    }

    #[test]
    fn one_point_gradient() {
        let w = ToricWeight::logistic();
        let basis = LatticeBasis {
            level: 1,
            scale: Rational::from_integer(1),
            dilation: 1,
            points: vec![vec![1]],
        };
        let c = Configuration::new(vec![vec![0.7]], vec![vec![0.2]]).unwrap();
        let g = grad_log_vd(&c, &basis, &w).unwrap();
        assert!((g[0] - 2.0 * (1.0 - w.gradient(&[0.7])[0])).abs() < 1e-14);
        assert!(g[1].abs() < 1e-14);
    }
}
