//! The `𝓛_k` functional in toric coordinates: the expansion of the
//! torus-averaged product of squared determinants, its consistency checks,
//! and exact or Monte-Carlo evaluation of `𝓛_k`.
//!
//! Convention: `𝓛_k = −(1/(2kN̂)) log ∫ Π_j |D̂_j|²_{φ_j} dρ^{⊗N̂} dy/(2π)^{nN̂}`,
//! which tends to the coupled energy `F(Σφ_j)`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fekete::{maximize_product, FeketeOptions};
use crate::linalg::{lu, C64};
use crate::measure::dot;
use crate::polytope::LatticeBasis;
use crate::quadrature::{log_sum_exp, periodic_mean};
use crate::transport::assignment;
use crate::vandermonde::{n_hat, product_objective, BundleSpec, Configuration};

/// Default cap on the number of enumerated permutation tuples.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionEntry {
    /// `a_1, …, a_N`.
    pub a: Vec<Vec<i64>>,
    /// `Σ_{S_a} sign(σ_1)⋯sign(σ_m)`.
    pub signed_sum: i64,
    /// `|S_a|`.
    pub count: u64,
}

impl ExpansionEntry {
    /// `C_a`, the square of the signed sum.
    pub fn coefficient(&self) -> u128 {
        (self.signed_sum as i128 * self.signed_sum as i128) as u128
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionTable {
    pub dim: usize,
    pub n: usize,
    /// Sorted by `a`.
    pub entries: Vec<ExpansionEntry>,
    /// `Π_j N_j!`.
    pub tuples: u128,
}

impl ExpansionTable {
    pub fn total_count(&self) -> u128 {
        self.entries.iter().map(|e| e.count as u128).sum()
    }

    /// `log Σ_a C_a e^{Σ_i 2<x_i, a_i>}` (the torus average of `Π|D_j|²`).
    pub fn log_fiber_average(&self, x: &[Vec<f64>]) -> f64 {
        let terms: Vec<f64> = self
            .entries
            .iter()
            .filter(|e| e.signed_sum != 0)
            .map(|e| (e.coefficient() as f64).ln() + 2.0 * self.pairing(x, e))
            .collect();
        log_sum_exp(&terms)
    }

    fn pairing(&self, x: &[Vec<f64>], e: &ExpansionEntry) -> f64 {
        e.a.iter()
            .zip(x)
            .map(|(a, xi)| a.iter().zip(xi).map(|(&ai, v)| ai as f64 * v).sum::<f64>())
            .sum()
    }
}

/// All permutations of `0..n` with their signs (Heap's algorithm).
fn permutations(n: usize) -> Vec<(Vec<usize>, i64)> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let mut sign = 1i64;
    let mut out = vec![(p.clone(), sign)];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            sign = -sign;
            out.push((p.clone(), sign));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

fn factorial_product(bases: &[LatticeBasis]) -> u128 {
    bases
        .iter()
        .map(|b| (1..=b.len() as u128).fold(1u128, |a, v| a.saturating_mul(v)))
        .fold(1u128, |a, v| a.saturating_mul(v))
}

fn check_bases(bases: &[LatticeBasis]) -> Result<(usize, usize)> {
    let first = bases.first().ok_or(Error::Empty("basis list"))?;
    let dim = first.dim();
    for b in bases {
        if b.is_empty() {
            return Err(Error::Empty("lattice basis"));
        }
        if b.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: b.dim(),
            });
        }
    }
    Ok((dim, bases.iter().map(LatticeBasis::len).max().unwrap_or(0)))
}

/// Enumerates all permutation tuples `(σ_1, …, σ_m)` and collects
/// `a_i = Σ_j p^j_{σ_j(i)}` (with `p^j_{σ_j(i)} = 0` for `i ≥ N_j`).
pub fn expansion(bases: &[LatticeBasis], budget: u128) -> Result<ExpansionTable> {
    let (dim, n) = check_bases(bases)?;
    let tuples = factorial_product(bases);
    if tuples > budget {
        return Err(Error::BudgetExceeded { needed: tuples, budget });
    }
    let perms: Vec<Vec<(Vec<usize>, i64)>> = bases.iter().map(|b| permutations(b.len())).collect();

    fn descend(
        j: usize,
        acc: &mut Vec<i64>,
        sign: i64,
        bases: &[LatticeBasis],
        perms: &[Vec<(Vec<usize>, i64)>],
        dim: usize,
        out: &mut HashMap<Vec<i64>, (i64, u64)>,
    ) {
        if j == bases.len() {
            let e = out.entry(acc.clone()).or_insert((0, 0));
            e.0 += sign;
            e.1 += 1;
            return;
        }
        for (p, s) in &perms[j] {
            for (i, &l) in p.iter().enumerate() {
                for a in 0..dim {
                    acc[i * dim + a] += bases[j].points[l][a];
                }
            }
            descend(j + 1, acc, sign * s, bases, perms, dim, out);
            for (i, &l) in p.iter().enumerate() {
                for a in 0..dim {
                    acc[i * dim + a] -= bases[j].points[l][a];
                }
            }
        }
    }

    // split on the first bundle's permutations; integer sums merge exactly
    let merged = perms[0]
        .par_chunks(64)
        .map(|chunk| {
            let mut out = HashMap::new();
            let mut acc = vec![0i64; n * dim];
            for (p, s) in chunk {
                for (i, &l) in p.iter().enumerate() {
                    for a in 0..dim {
                        acc[i * dim + a] = bases[0].points[l][a];
                    }
                }
                for v in acc.iter_mut().skip(p.len() * dim) {
                    *v = 0;
                }
                descend(1, &mut acc, *s, bases, &perms, dim, &mut out);
            }
            out
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                let e = a.entry(k).or_insert((0, 0));
                e.0 += v.0;
                e.1 += v.1;
            }
            a
        });
    let mut entries: Vec<ExpansionEntry> = merged
        .into_iter()
        .map(|(k, (s, c))| ExpansionEntry {
            a: k.chunks(dim).map(<[i64]>::to_vec).collect(),
            signed_sum: s,
            count: c,
        })
        .collect();
    entries.sort_by(|x, y| x.a.cmp(&y.a));
    Ok(ExpansionTable { dim, n, entries, tuples })
}

#[derive(Clone, Debug, Serialize)]
pub struct FiberReport {
    /// Torus average of `Π_j |D_j|²` by the periodic trapezoid rule.
    pub quadrature: f64,
    /// `Σ_a C_a e^{2Σ<x_i, a_i>}` from the expansion table.
    pub expansion: f64,
    pub relative_error: f64,
    /// Nodes per torus coordinate.
    pub nodes: usize,
}

/// Compares the torus average of `Π_j |D_j(x + iy)|²` (weights omitted on
/// both sides) computed by direct quadrature with the expansion table.
pub fn fiber_integral_check(x: &[Vec<f64>], bases: &[LatticeBasis]) -> Result<FiberReport> {
    let (dim, n) = check_bases(bases)?;
    if x.len() < n {
        return Err(Error::InsufficientPoints { needed: n, got: x.len() });
    }
    if n * dim > 4 {
        return Err(Error::Unsupported(format!(
            "torus quadrature in dimension {} (at most 4)",
            n * dim
        )));
    }
    let table = expansion(bases, DEFAULT_BUDGET)?;
    let expansion_side = table.log_fiber_average(x).exp();

    // the integrand is a trigonometric polynomial whose degree per
    // coordinate is at most the summed coordinate ranges of the bases
    let degree = (0..dim)
        .map(|a| {
            bases
                .iter()
                .map(|b| {
                    let lo = b.points.iter().map(|p| p[a]).min().unwrap_or(0);
                    let hi = b.points.iter().map(|p| p[a]).max().unwrap_or(0);
                    (hi - lo) as usize
                })
                .sum::<usize>()
        })
        .max()
        .unwrap_or(0);
    let q = degree + 1;
    let xf: Vec<Vec<f64>> = x[..n].to_vec();
    let quadrature = periodic_mean(n * dim, q, |y| {
        bases
            .iter()
            .map(|b| {
                let nj = b.len();
                let mut m = Vec::with_capacity(nj * nj);
                for i in 0..nj {
                    let yi = &y[i * dim..(i + 1) * dim];
                    for p in &b.points {
                        let pf: Vec<f64> = p.iter().map(|&c| c as f64).collect();
                        m.push(C64::from_polar(dot(&xf[i], &pf).exp(), dot(yi, &pf)));
                    }
                }
                (2.0 * lu(m, nj).log_abs_det).exp()
            })
            .product::<f64>()
    });
    let scale = expansion_side.abs().max(quadrature.abs());
    let relative_error = if scale < 1e-300 {
        0.0
    } else {
        (quadrature - expansion_side).abs() / expansion_side.abs().max(1e-300)
    };
    Ok(FiberReport {
        quadrature,
        expansion: expansion_side,
        relative_error,
        nodes: q,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MinaReport {
    /// `min_{a: S_a ≠ ∅} −Σ_i <x_i, a_i>`.
    pub expansion_side: f64,
    /// `Σ_j k N_j C(δ^{N_j}(x), δ^{N_j}(p^j/k))` by the assignment solver.
    pub transport_side: f64,
    pub difference: f64,
}

/// Both sides of the identity between the dominant exponent of the
/// expansion and the sum of discrete transport costs.
pub fn mina_check(x: &[Vec<f64>], bases: &[LatticeBasis], k: u32, budget: u128) -> Result<MinaReport> {
    let (_, n) = check_bases(bases)?;
    if x.len() < n {
        return Err(Error::InsufficientPoints { needed: n, got: x.len() });
    }
    let table = expansion(bases, budget)?;
    let expansion_side = table
        .entries
        .iter()
        .map(|e| -table.pairing(x, e))
        .fold(f64::INFINITY, f64::min);
    let kf = k as f64;
    let mut transport_side = 0.0;
    for b in bases {
        let nj = b.len();
        let p: Vec<Vec<f64>> = b.points.iter().map(|q| q.iter().map(|&c| c as f64 / kf).collect()).collect();
        let r = assignment(&x[..nj], &p)?;
        transport_side += kf * nj as f64 * r.cost;
    }
    Ok(MinaReport {
        expansion_side,
        transport_side,
        difference: (expansion_side - transport_side).abs(),
    })
}

/// Probability density `ρ` on `ℝ` used per coordinate for the reference
/// volume form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// Standard normal.
    Gaussian,
    /// `ρ(x) = ½ sech²(x)`, the pushforward of the Fubini–Study volume.
    #[serde(alias = "logistic-product")]
    Logistic,
}

impl Reference {
    pub fn log_density(self, x: &[f64]) -> f64 {
        x.iter()
            .map(|&t| match self {
                Reference::Gaussian => -0.5 * t * t - 0.5 * std::f64::consts::TAU.ln(),
                Reference::Logistic => std::f64::consts::LN_2 - 2.0 * t.abs() - 2.0 * (-2.0 * t.abs()).exp().ln_1p(),
            })
            .sum()
    }

    fn sample<R: Rng>(self, rng: &mut R, dim: usize) -> Vec<f64> {
        (0..dim)
            .map(|_| match self {
                Reference::Gaussian => rng.sample(StandardNormal),
                Reference::Logistic => {
                    let u: f64 = rng.random_range(f64::EPSILON..1.0);
                    0.5 * (u / (1.0 - u)).ln()
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct LkOptions {
    pub reference: Reference,
    /// `None` for the exact route; otherwise the Monte-Carlo sample count.
    pub samples: Option<usize>,
    pub seed: u64,
    /// Trapezoid nodes per axis for the one-point integrals.
    pub quad_nodes: usize,
    /// Half-width of the integration box per axis.
    pub half_width: f64,
    pub budget: u128,
}

impl LkOptions {
    pub fn exact(reference: Reference, dim: usize) -> Self {
        Self {
            reference,
            samples: None,
            seed: 0,
            quad_nodes: if dim == 1 { 16001 } else { 401 },
            half_width: 40.0,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn monte_carlo(reference: Reference, dim: usize, samples: usize, seed: u64) -> Self {
        Self {
            samples: Some(samples),
            seed,
            ..Self::exact(reference, dim)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LkReport {
    pub value: f64,
    pub stderr: f64,
    pub k: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub budget: u128,
    pub seed: Option<u64>,
    pub reference: Reference,
    pub method: &'static str,
    /// Number of terms summed (distinct `a` or basis points) in the exact
    /// route.
    pub terms: usize,
    /// Shift to the value obtained with the orthonormalized basis.
    pub onb_correction: f64,
}

pub const MC_BATCHES: usize = 16;

/// Per-point weights `w_i = Σ_{j: i < N_j} d_j φ_j`, grouped by the set of
/// active bundles.
struct PointWeights<'a> {
    bundles: &'a [BundleSpec],
    bases: &'a [LatticeBasis],
}

impl PointWeights<'_> {
    fn active(&self, i: usize) -> Vec<usize> {
        (0..self.bases.len()).filter(|&j| i < self.bases[j].len()).collect()
    }

    fn value(&self, active: &[usize], x: &[f64]) -> f64 {
        active
            .iter()
            .map(|&j| self.bases[j].dilation as f64 * self.bundles[j].weight.value(x))
            .sum()
    }
}

fn require_unit_exponents(bundles: &[BundleSpec]) -> Result<()> {
    if bundles.iter().any(|b| (b.c - 1.0).abs() > 1e-12) {
        return Err(Error::Unsupported(
            "L_k evaluation needs volume-normalized bundles (Leb(P_j) = 1)".into(),
        ));
    }
    Ok(())
}

/// Estimates `𝓛_k` exactly (per-coordinate factorization of the
/// torus-averaged integrand) or by Monte-Carlo over `x ~ ρ^{⊗N̂}`.
pub fn lk_estimate(bundles: &[BundleSpec], k: u32, opts: &LkOptions) -> Result<LkReport> {
    if bundles.is_empty() {
        return Err(Error::Empty("bundle list"));
    }
    require_unit_exponents(bundles)?;
    let bases = bundles.iter().map(|b| b.basis(k)).collect::<Result<Vec<_>>>()?;
    let (dim, nh) = check_bases(&bases)?;
    let pw = PointWeights { bundles, bases: &bases };
    let norm = 1.0 / (2.0 * k as f64 * nh as f64);
    let onb_correction = onb_correction(&bases, bundles, opts)? * norm;
    let (log_int, stderr_rel, terms, method) = match opts.samples {
        None => {
            let (v, t) = exact_log_integral(&pw, dim, nh, opts)?;
            (v, 0.0, t, "exact")
        }
        Some(s) => {
            let (v, rel) = monte_carlo_log_integral(&pw, dim, nh, s, opts)?;
            (v, rel, 0, "monte-carlo")
        }
    };
    Ok(LkReport {
        value: -norm * log_int,
        stderr: norm * stderr_rel,
        k,
        n: nh,
        budget: opts.budget,
        seed: opts.samples.map(|_| opts.seed),
        reference: opts.reference,
        method,
        terms,
        onb_correction,
    })
}

/// Tabulates `log M(a) = log ∫ e^{2<x,a> − 2w(x)} ρ(x) dx` for one weight.
struct MomentTable {
    nodes: Vec<Vec<f64>>,
    base: Vec<f64>,
}

impl MomentTable {
    /// Trapezoid weights, or Simpson weights for `kinked` integrands (the
    /// support-function kink at the origin falls on an even node when
    /// `(q − 1)/2` is even, which makes the error `O(h⁴)` there).
    fn new<W: Fn(&[f64]) -> f64>(dim: usize, opts: &LkOptions, kinked: bool, w: W) -> Result<Self> {
        let q = opts.quad_nodes;
        let b = opts.half_width;
        let h = 2.0 * b / (q - 1) as f64;
        let simpson = kinked && q % 2 == 1 && q >= 3;
        let total = q.pow(dim as u32);
        let mut nodes = Vec::with_capacity(total);
        let mut base = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut x = vec![0.0; dim];
            let mut lw = 0.0;
            for a in (0..dim).rev() {
                let i = rem % q;
                rem /= q;
                x[a] = if i == q - 1 { b } else { -b + i as f64 * h };
                lw += h.ln();
                if simpson {
                    lw += if i == 0 || i == q - 1 {
                        -(3f64).ln()
                    } else if i % 2 == 1 {
                        (4.0f64 / 3.0).ln()
                    } else {
                        (2.0f64 / 3.0).ln()
                    };
                } else if i == 0 || i == q - 1 {
                    lw -= std::f64::consts::LN_2;
                }
            }
            let v = lw - 2.0 * w(&x) + opts.reference.log_density(&x);
            if v.is_nan() {
                return Err(Error::Quadrature("non-finite weight on the quadrature box".into()));
            }
            base.push(v);
            nodes.push(x);
        }
        Ok(Self { nodes, base })
    }

    fn log_moment(&self, a: &[i64]) -> f64 {
        let af: Vec<f64> = a.iter().map(|&v| v as f64).collect();
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.base)
            .map(|(x, b)| b + 2.0 * dot(x, &af))
            .collect();
        log_sum_exp(&terms)
    }
}

fn exact_log_integral(pw: &PointWeights, dim: usize, nh: usize, opts: &LkOptions) -> Result<(f64, usize)> {
    let mut tables: HashMap<Vec<usize>, MomentTable> = HashMap::new();
    let classes: Vec<Vec<usize>> = (0..nh).map(|i| pw.active(i)).collect();
    for c in &classes {
        if !tables.contains_key(c) {
            let kinked = c.iter().any(|&j| pw.bundles[j].weight.hessian(&vec![0.0; dim]).is_none());
            let t = MomentTable::new(dim, opts, kinked, |x| pw.value(c, x))?;
            tables.insert(c.clone(), t);
        }
    }
    if pw.bases.len() == 1 {
        // Gram identity: the torus average is diagonal in the monomials
        let t = &tables[&classes[0]];
        let lm: Vec<f64> = pw.bases[0].points.par_iter().map(|p| t.log_moment(p)).collect();
        let log_fact: f64 = (1..=nh).map(|v| (v as f64).ln()).sum();
        return Ok((log_fact + lm.iter().sum::<f64>(), nh));
    }
    let table = expansion(pw.bases, opts.budget)?;
    // distinct (class, a_i) pairs, each integrated once
    let mut keys: Vec<(Vec<usize>, Vec<i64>)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for e in &table.entries {
        for (i, a) in e.a.iter().enumerate() {
            let key = (classes[i].clone(), a.clone());
            if seen.insert(key.clone()) {
                keys.push(key);
            }
        }
    }
    let values: Vec<f64> = keys.par_iter().map(|(c, a)| tables[c].log_moment(a)).collect();
    let moments: HashMap<(Vec<usize>, Vec<i64>), f64> = keys.into_iter().zip(values).collect();
    let terms: Vec<f64> = table
        .entries
        .iter()
        .filter(|e| e.signed_sum != 0)
        .map(|e| {
            (e.coefficient() as f64).ln()
                + e.a
                    .iter()
                    .enumerate()
                    .map(|(i, a)| moments[&(classes[i].clone(), a.clone())])
                    .sum::<f64>()
        })
        .collect();
    let n_terms = terms.len();
    Ok((log_sum_exp(&terms), n_terms))
}

/// `log` of the integrand after exact torus averaging (expansion table) or,
/// beyond the enumeration budget, of `Π|D_j|²` at a sampled angle.
fn log_integrand<R: Rng>(
    pw: &PointWeights,
    table: Option<&ExpansionTable>,
    x: &[Vec<f64>],
    dim: usize,
    rng: &mut R,
) -> f64 {
    let weights: f64 = x
        .iter()
        .enumerate()
        .map(|(i, xi)| pw.value(&pw.active(i), xi))
        .sum();
    let base = match table {
        Some(t) => t.log_fiber_average(x),
        None => {
            let mut tot = 0.0;
            let y: Vec<Vec<f64>> = (0..x.len())
                .map(|_| (0..dim).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect())
                .collect();
            for b in pw.bases {
                let nj = b.len();
                let mut m = Vec::with_capacity(nj * nj);
                let mut shift = 0.0;
                for i in 0..nj {
                    let s = b
                        .points
                        .iter()
                        .map(|p| x[i].iter().zip(p).map(|(v, &c)| v * c as f64).sum::<f64>())
                        .fold(f64::NEG_INFINITY, f64::max);
                    shift += s;
                    for p in &b.points {
                        let pf: Vec<f64> = p.iter().map(|&c| c as f64).collect();
                        m.push(C64::from_polar((dot(&x[i], &pf) - s).exp(), dot(&y[i], &pf)));
                    }
                }
                tot += 2.0 * (lu(m, nj).log_abs_det + shift);
            }
            tot
        }
    };
    base - 2.0 * weights
}

fn monte_carlo_log_integral(pw: &PointWeights, dim: usize, nh: usize, samples: usize, opts: &LkOptions) -> Result<(f64, f64)> {
    if samples < MC_BATCHES {
        return Err(Error::InvalidArgument(format!("need at least {MC_BATCHES} samples")));
    }
    let table = if factorial_product(pw.bases) <= opts.budget {
        Some(expansion(pw.bases, opts.budget)?)
    } else {
        None
    };
    let per = samples / MC_BATCHES;
    let extra = samples % MC_BATCHES;
    // one ChaCha stream per batch: results do not depend on the worker count
    let batches: Vec<(f64, usize)> = (0..MC_BATCHES)
        .into_par_iter()
        .map(|b| {
            let count = per + usize::from(b < extra);
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(b as u64);
            let vals: Vec<f64> = (0..count)
                .map(|_| {
                    let x: Vec<Vec<f64>> = (0..nh).map(|_| opts.reference.sample(&mut rng, dim)).collect();
                    log_integrand(pw, table.as_ref(), &x, dim, &mut rng)
                })
                .collect();
            (log_sum_exp(&vals) - (count as f64).ln(), count)
        })
        .collect();
    let total = log_sum_exp(&batches.iter().map(|(m, c)| m + (*c as f64).ln()).collect::<Vec<_>>()) - (samples as f64).ln();
    if !total.is_finite() {
        return Err(Error::InvalidArgument("zero effective sample size".into()));
    }
    // batch means relative to the pooled mean; delta method for the log
    let rel: Vec<f64> = batches.iter().map(|(m, _)| (m - total).exp()).collect();
    let mean = rel.iter().sum::<f64>() / MC_BATCHES as f64;
    let var = rel.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (MC_BATCHES - 1) as f64;
    let se_log = (var / MC_BATCHES as f64).sqrt() / mean;
    Ok((total, se_log))
}

/// `Σ_j Σ_{p ∈ B_j} log ∫ e^{2<x,p> − 2 d_j h_{P_j}(x)} ρ(x) dx`; adding
/// `1/(2kN̂)` times this to `𝓛_k` gives the value in the orthonormal basis.
fn onb_correction(bases: &[LatticeBasis], bundles: &[BundleSpec], opts: &LkOptions) -> Result<f64> {
    let mut total = 0.0;
    for (b, spec) in bases.iter().zip(bundles) {
        let d = b.dilation as f64;
        let t = MomentTable::new(b.dim(), opts, true, |x| d * spec.polytope.support_function(x))?;
        total += b.points.par_iter().map(|p| t.log_moment(p)).sum::<f64>();
    }
    Ok(total)
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub k: u32,
    pub lk: f64,
    pub lk_stderr: f64,
    /// `−(1/(2kN̂)) log max Π|D̂_j|²` at the best configuration found.
    pub sup_side: f64,
    /// `lk − sup_side`; nonnegative up to the estimate's error.
    pub gap: f64,
    /// `"optimizer"` or `"provided"`.
    pub config_source: &'static str,
}

/// Gap between `𝓛_k` and the normalized log of the maximal product. The
/// maximum comes from the optimizer; a provided configuration is used only
/// if it is finite and better.
pub fn l2_sup_gap(
    bundles: &[BundleSpec],
    k: u32,
    provided: Option<&Configuration>,
    lk_opts: &LkOptions,
    fekete_opts: &FeketeOptions,
) -> Result<GapReport> {
    let lk = lk_estimate(bundles, k, lk_opts)?;
    let run = maximize_product(bundles, k, fekete_opts)?;
    let mut best = run.objective;
    let mut config_source = "optimizer";
    if let Some(c) = provided {
        let bases = bundles.iter().map(|b| b.basis(k)).collect::<Result<Vec<_>>>()?;
        if c.len() >= n_hat(&bases) {
            let v = product_objective(c, bundles, k)?;
            if v.is_finite() && v > best {
                best = v;
                config_source = "provided";
            }
        }
    }
    let sup_side = -0.5 * best;
    Ok(GapReport {
        k,
        lk: lk.value,
        lk_stderr: lk.stderr,
        sup_side,
        gap: lk.value - sup_side,
        config_source,
    })
}
