//! Legendre transforms of weights, the projection onto semi-positive weights,
//! equilibrium measures and energies, and the coupled equilibrium solver.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::legendre::{conjugate_on_axes, Conjugate};
use crate::measure::{dot, DiscreteMeasure};
use crate::optimize::{self, LbfgsOptions};
use crate::polytope::LatticePolytope;
use crate::transport::wasserstein1;
use crate::weight::{vertex_range_1d, ToricWeight};

/// Stand-in for `+∞` when a conjugate is restricted to a non-box polytope.
const OUTSIDE: f64 = 1e100;

/// Odd node count per axis of the `x`-grid used to conjugate a weight whose
/// slope grid has `res` nodes per axis, so that `0` is always a node.
fn x_nodes(dim: usize, res: usize) -> usize {
    match dim {
        1 => 16 * res.max(32) + 1,
        _ => (2 * res.max(16) + 1).min(1025),
    }
}

/// `[−B, B]ⁿ` search box for the conjugate of `phi`.
pub fn weight_box(phi: &ToricWeight, nodes: usize) -> Result<Grid> {
    let b = phi.suggested_half_width();
    let n = phi.dim();
    Grid::uniform(&vec![-b; n], &vec![b; n], nodes)
}

/// `φ*(p) = sup_x <x,p> − φ(x)` over the product of `slope_axes`, from a grid
/// transform refined by Newton steps for the smooth families.
///
/// Returns `Error::BoxTooSmall` when the grid maximizer of a slope in the
/// strict interior of `interior_of` sits on the box boundary.
pub fn conjugate_of_weight(
    phi: &ToricWeight,
    slope_axes: &[Vec<f64>],
    xgrid: &Grid,
    interior_of: Option<&LatticePolytope>,
) -> Result<Conjugate> {
    let f: Vec<f64> = xgrid.nodes().map(|x| phi.value(&x)).collect();
    let mut c = conjugate_on_axes(xgrid, &f, slope_axes)?;
    let n = phi.dim();
    let slopes = product(slope_axes);
    if let Some(q) = interior_of {
        for (k, p) in slopes.iter().enumerate() {
            let on_edge = c.argmax_index[k]
                .iter()
                .enumerate()
                .any(|(a, &i)| i == 0 || i + 1 == xgrid.res()[a]);
            if on_edge && q.interior_contains(p, 1e-9) {
                return Err(Error::BoxTooSmall { slope: p.clone() });
            }
        }
    }
    if phi.hessian(&vec![0.0; n]).is_some() {
        let polished: Vec<(f64, Vec<f64>, bool)> = slopes
            .par_iter()
            .zip(c.argmax.par_iter())
            .map(|(p, x0)| newton_polish(phi, p, x0))
            .collect();
        for (k, (v, x, ok)) in polished.into_iter().enumerate() {
            if ok && v >= c.values[k] {
                c.values[k] = v;
                c.argmax[k] = x;
                c.ties[k] = false;
            }
        }
    }
    Ok(c)
}

fn product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    match axes.len() {
        1 => axes[0].iter().map(|&a| vec![a]).collect(),
        _ => axes[0]
            .iter()
            .flat_map(|&a| axes[1].iter().map(move |&b| vec![a, b]))
            .collect(),
    }
}

/// Newton iterations on `∇φ(x) = p` with backtracking on `<x,p> − φ(x)`.
fn newton_polish(phi: &ToricWeight, p: &[f64], x0: &[f64]) -> (f64, Vec<f64>, bool) {
    let n = p.len();
    let obj = |x: &[f64]| dot(x, p) - phi.value(x);
    let mut x = x0.to_vec();
    let mut fx = obj(&x);
    for _ in 0..60 {
        let g: Vec<f64> = phi.gradient(&x).iter().zip(p).map(|(a, b)| b - a).collect();
        if g.iter().all(|v| v.abs() <= 1e-15) {
            break;
        }
        let Some(h) = phi.hessian(&x) else { break };
        let step = match n {
            1 => {
                if h[0] <= 1e-300 {
                    break;
                }
                vec![g[0] / h[0]]
            }
            _ => {
                let det = h[0] * h[3] - h[1] * h[2];
                if det.abs() <= 1e-300 || h[0] <= 0.0 {
                    break;
                }
                vec![(h[3] * g[0] - h[1] * g[1]) / det, (h[0] * g[1] - h[2] * g[0]) / det]
            }
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..50 {
            let xt: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            let ft = obj(&xt);
            if ft >= fx {
                let done = xt == x;
                x = xt;
                fx = ft;
                moved = !done;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (fx, x, fx.is_finite())
}

/// Legendre transform of a grid function onto a `res`-node grid of `q`'s
/// bounding box.
pub fn legendre_transform(f: &GridFunction, q: &LatticePolytope, res: usize) -> Result<GridFunction> {
    if q.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: q.dim(),
        });
    }
    let pgrid = Grid::on_polytope(q, res)?;
    let axes: Vec<Vec<f64>> = (0..pgrid.dim()).map(|a| pgrid.axis(a)).collect();
    let c = conjugate_on_axes(f.grid(), f.values(), &axes)?;
    for (k, p) in pgrid.nodes().enumerate() {
        let on_edge = c.argmax_index[k]
            .iter()
            .enumerate()
            .any(|(a, &i)| i == 0 || i + 1 == f.grid().res()[a]);
        if on_edge && q.interior_contains(&p, 1e-9) {
            return Err(Error::BoxTooSmall { slope: p });
        }
    }
    GridFunction::new(pgrid, c.values, None)
}

/// Conjugate of a weight on the endpoint-inclusive `res`-grid of `P`'s
/// bounding box (nodes outside a non-box `P` carry the transform over the
/// box, which the callers mask).
pub fn weight_conjugate(phi: &ToricWeight, p: &LatticePolytope, res: usize) -> Result<GridFunction> {
    let pgrid = Grid::on_polytope(p, res)?;
    let axes: Vec<Vec<f64>> = (0..pgrid.dim()).map(|a| pgrid.axis(a)).collect();
    let xgrid = weight_box(phi, x_nodes(phi.dim(), res))?;
    let c = conjugate_of_weight(phi, &axes, &xgrid, Some(p))?;
    GridFunction::new(pgrid, c.values, None)
}

/// `𝒫(φ) = (φ* + ι_P)*` sampled on a `[−B, B]ⁿ` grid, with `h_P` as the
/// asymptote outside it.
pub fn project(phi: &ToricWeight, p: &LatticePolytope, res: usize) -> Result<GridFunction> {
    if phi.polytope() != p {
        return Err(Error::InvalidPolytope("project: the weight's polytope must be P".into()));
    }
    let conj = weight_conjugate(phi, p, res)?;
    let pgrid = conj.grid().clone();
    let g: Vec<f64> = pgrid
        .nodes()
        .zip(conj.values())
        .map(|(q, v)| if p.contains(&q, 1e-12) { *v } else { OUTSIDE })
        .collect();
    let out_nodes = match p.dim() {
        1 => 4 * res + 1,
        _ => res,
    };
    let xgrid = weight_box(phi, out_nodes | 1)?;
    let xaxes: Vec<Vec<f64>> = (0..xgrid.dim()).map(|a| xgrid.axis(a)).collect();
    let back = conjugate_on_axes(&pgrid, &g, &xaxes)?;
    GridFunction::new(xgrid, back.values, Some(p.clone()))
}

/// Equilibrium measure as the gradient pushforward of `ν_P`.
#[derive(Clone, Debug)]
pub struct EquilibriumMeasure {
    pub measure: DiscreteMeasure,
    /// Quadrature nodes `p` of `ν_P`.
    pub slopes: Vec<Vec<f64>>,
    /// Maximizer of `<x,p> − φ(x)` per node.
    pub argmax: Vec<Vec<f64>>,
    /// `φ*(p)` per node.
    pub conjugate: Vec<f64>,
    pub weights: Vec<f64>,
    /// Nodes whose maximizer was not unique on the grid (midpoint chosen).
    pub flagged: usize,
}

/// `φ*` and its maximizers at the nodes of the `m`-point quadrature of `ν_P`.
pub fn conjugate_at_nodes(phi: &ToricWeight, p: &LatticePolytope, m: usize) -> Result<EquilibriumMeasure> {
    if phi.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: phi.dim(),
        });
    }
    let (axes, mask) = p.midpoint_axes(m)?;
    let per_axis = axes[0].len();
    let xgrid = weight_box(phi, x_nodes(p.dim(), per_axis))?;
    let c = conjugate_of_weight(phi, &axes, &xgrid, Some(p))?;
    let all = product(&axes);
    let mut slopes = Vec::new();
    let mut argmax = Vec::new();
    let mut conjugate = Vec::new();
    let mut flagged = 0;
    for (k, keep) in mask.iter().enumerate() {
        if *keep {
            slopes.push(all[k].clone());
            argmax.push(c.argmax[k].clone());
            conjugate.push(c.values[k]);
            flagged += c.ties[k] as usize;
        }
    }
    let nu = p.uniform_measure(m)?;
    let weights = nu.weights().to_vec();
    let measure = DiscreteMeasure::new(p.dim(), argmax.concat(), weights.clone())?;
    Ok(EquilibriumMeasure {
        measure,
        slopes,
        argmax,
        conjugate,
        weights,
        flagged,
    })
}

/// `(∇φ*)_# ν_P` with `m` quadrature nodes (per axis in dimension two,
/// `m²` nodes of the bounding box before masking).
pub fn equilibrium_measure(phi: &ToricWeight, p: &LatticePolytope, m: usize) -> Result<EquilibriumMeasure> {
    conjugate_at_nodes(phi, p, m.pow(p.dim() as u32))
}

/// `E(φ) = −∫_P φ* dν_P`, with `res` nodes per axis.
pub fn equilibrium_energy(phi: &ToricWeight, p: &LatticePolytope, res: usize) -> Result<f64> {
    let eq = conjugate_at_nodes(phi, p, res.pow(p.dim() as u32))?;
    Ok(-eq.conjugate.iter().zip(&eq.weights).map(|(c, w)| c * w).sum::<f64>())
}

/// Residuals of a candidate collection of equilibrium potentials.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledResidual {
    /// `max (Σψ_j − φ)` over the grid; must be `≤ tol`.
    pub max_excess: f64,
    /// `max |Σψ_j − φ|` over the atoms of the Monge–Ampère measures.
    pub support_gap: f64,
    /// Largest `W1` between the Monge–Ampère measures of two potentials.
    pub ma_w1: f64,
}

impl CoupledResidual {
    pub fn within(&self, tol: f64) -> bool {
        self.max_excess <= tol && self.support_gap <= tol && self.ma_w1 <= tol
    }
}

#[derive(Clone, Debug)]
pub struct CoupledPotentials {
    pub potentials: Vec<GridFunction>,
    /// The common measure `μ`.
    pub measure: DiscreteMeasure,
    /// `MA(ψ_j)` per bundle, as pushforwards of `ν_{P_j}`.
    pub ma_measures: Vec<DiscreteMeasure>,
    pub residual: CoupledResidual,
}

impl CoupledPotentials {
    pub fn sum_at(&self, x: &[f64]) -> f64 {
        self.potentials.iter().map(|f| f.eval(x)).sum()
    }

    /// Recomputes the residuals against `phi`.
    pub fn residual_against(&self, phi: &ToricWeight) -> Result<CoupledResidual> {
        let grid = self.potentials[0].grid();
        let max_excess = grid
            .nodes()
            .map(|x| self.sum_at(&x) - phi.value(&x))
            .fold(f64::NEG_INFINITY, f64::max);
        let support_gap = self
            .ma_measures
            .iter()
            .flat_map(|m| m.points().map(|x| (self.sum_at(x) - phi.value(x)).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        let mut ma_w1 = 0.0f64;
        for a in 0..self.ma_measures.len() {
            for b in a + 1..self.ma_measures.len() {
                ma_w1 = ma_w1.max(wasserstein1(&self.ma_measures[a], &self.ma_measures[b])?);
            }
        }
        Ok(CoupledResidual {
            max_excess,
            support_gap,
            ma_w1,
        })
    }
}

#[derive(Clone, Debug)]
pub struct CoupledOptions {
    /// Nodes per axis of the `x`-grid.
    pub x_res: usize,
    /// Initial and final smoothing temperature, and the decay factor.
    pub tau_start: f64,
    pub tau_min: f64,
    pub tau_decay: f64,
    pub max_iter_per_stage: usize,
}

impl CoupledOptions {
    pub fn for_dim(dim: usize) -> Self {
        Self {
            x_res: if dim == 1 { 2049 } else { 65 },
            tau_start: 0.1,
            tau_min: 1e-4,
            tau_decay: 0.3,
            max_iter_per_stage: 2000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoupledSolution {
    /// `F(φ)` as the best value of `f_φ` reached.
    pub value: f64,
    pub potentials: CoupledPotentials,
    /// `f_φ` at the end of each smoothing stage.
    pub trace: Vec<f64>,
    /// Running maximum of `trace`.
    pub accepted: Vec<f64>,
}

struct Bundle {
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Coupled equilibrium energy `F(φ) = sup f_φ` for bundles `(P_j, res_j)`.
///
/// For `m = 1` the maximizer is `𝒫(φ)` and `F = E(φ)`. For `m ≥ 2` the
/// potentials are parametrized by their conjugates `u_j` on the quadrature
/// nodes of `ν_{P_j}` (`φ_j = u_j*`), in which `f_φ` is concave; its
/// log-sum-exp smoothing is maximized by L-BFGS along a decreasing
/// temperature schedule, and `f_φ` itself is evaluated after every stage.
pub fn coupled_energy(
    phi: &ToricWeight,
    bundles: &[(LatticePolytope, usize)],
    opts: &CoupledOptions,
) -> Result<CoupledSolution> {
    let m = bundles.len();
    let first = &bundles.first().ok_or(Error::Empty("bundle list"))?.0;
    let mut sum_poly = first.clone();
    for (p, _) in &bundles[1..] {
        sum_poly = sum_poly.minkowski_sum(p)?;
    }
    if &sum_poly != phi.polytope() {
        return Err(Error::InvalidPolytope(
            "coupled energy: the weight's polytope must be the Minkowski sum of the bundle polytopes".into(),
        ));
    }
    if m == 1 {
        let (p, res) = &bundles[0];
        let value = equilibrium_energy(phi, p, *res)?;
        let psi = project(phi, p, *res)?;
        let eq = equilibrium_measure(phi, p, *res)?;
        let mut pot = CoupledPotentials {
            potentials: vec![psi],
            measure: eq.measure.clone(),
            ma_measures: vec![eq.measure],
            residual: CoupledResidual {
                max_excess: 0.0,
                support_gap: 0.0,
                ma_w1: 0.0,
            },
        };
        pot.residual = pot.residual_against(phi)?;
        return Ok(CoupledSolution {
            value,
            potentials: pot,
            trace: vec![value],
            accepted: vec![value],
        });
    }

    let dim = phi.dim();
    let xgrid = weight_box(phi, opts.x_res)?;
    let xs: Vec<Vec<f64>> = xgrid.nodes().collect();
    let phix: Vec<f64> = xs.iter().map(|x| phi.value(x)).collect();
    let bs: Vec<Bundle> = bundles
        .iter()
        .map(|(p, res)| {
            let nu = p.uniform_measure(res.pow(dim as u32))?;
            Ok(Bundle {
                nodes: nu.points().map(<[f64]>::to_vec).collect(),
                weights: nu.weights().to_vec(),
            })
        })
        .collect::<Result<_>>()?;
    let offsets: Vec<usize> = bs
        .iter()
        .scan(0, |acc, b| {
            let o = *acc;
            *acc += b.nodes.len();
            Some(o)
        })
        .collect();
    let total: usize = bs.iter().map(|b| b.nodes.len()).sum();
    let split = |j: usize| -> std::ops::Range<usize> { offsets[j]..offsets[j] + bs[j].nodes.len() };

    let exact = |u: &[f64]| -> (f64, f64) {
        let lin: f64 = (0..m)
            .map(|j| dot(&bs[j].weights, &u[split(j)]))
            .sum();
        let excess = xs
            .par_chunks(256)
            .zip(phix.par_chunks(256))
            .map(|(xc, fc)| {
                xc.iter()
                    .zip(fc)
                    .map(|(x, f)| {
                        (0..m)
                            .map(|j| hard_conj(x, &bs[j].nodes, &u[split(j)]))
                            .sum::<f64>()
                            - f
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .reduce(|| f64::NEG_INFINITY, f64::max);
        (-lin - excess, excess)
    };

    let mut u = vec![0.0; total];
    let mut tau = opts.tau_start;
    let mut trace = Vec::new();
    let mut accepted: Vec<f64> = Vec::new();
    let mut best_u = u.clone();
    let mut best = f64::NEG_INFINITY;
    let mut last_converged;
    let lopts = LbfgsOptions {
        memory: 20,
        max_iter: opts.max_iter_per_stage,
        grad_tol: 1e-11,
        f_tol: 1e-15,
        max_backtracks: 50,
    };
    loop {
        let t = tau;
        let r = optimize::maximize(|v| smoothed(v, t, &xs, &phix, &bs, &offsets), u.clone(), &lopts, |_| {});
        u = r.x;
        last_converged = r.converged;
        let (f, _) = exact(&u);
        trace.push(f);
        if f > best {
            best = f;
            best_u = u.clone();
        }
        accepted.push(best);
        if tau <= opts.tau_min * (1.0 + 1e-12) {
            break;
        }
        tau = (tau * opts.tau_decay).max(opts.tau_min);
    }
    let (value, excess) = exact(&best_u);
    if !last_converged || !value.is_finite() {
        return Err(Error::NonConvergence {
            iterations: trace.len(),
            best_value: value,
            residual: excess,
        });
    }

    // potentials ψ_j = u_j* shifted so that max(Σψ_j − φ) = 0
    let shift = excess / m as f64;
    let potentials: Vec<GridFunction> = (0..m)
        .map(|j| {
            let vals: Vec<f64> = xs
                .iter()
                .map(|x| hard_conj(x, &bs[j].nodes, &best_u[split(j)]) - shift)
                .collect();
            GridFunction::new(xgrid.clone(), vals, Some(bundles[j].0.clone()))
        })
        .collect::<Result<_>>()?;

    // entropic transport plans at the final temperature give the common
    // measure (x-marginal) and barycentric gradient maps per bundle
    let (w, maps) = plans(&best_u, opts.tau_min, &xs, &phix, &bs, &offsets);
    let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 1e-14).collect();
    let kept_mass: f64 = keep.iter().map(|&i| w[i]).sum();
    let measure = DiscreteMeasure::new(
        dim,
        keep.iter().flat_map(|&i| xs[i].clone()).collect(),
        keep.iter().map(|&i| w[i] / kept_mass).collect(),
    )?;
    let ma_measures = maps
        .into_iter()
        .zip(&bs)
        .map(|(pts, b)| DiscreteMeasure::new(dim, pts.concat(), b.weights.clone()))
        .collect::<Result<Vec<_>>>()?;
    let mut pot = CoupledPotentials {
        potentials,
        measure,
        ma_measures,
        residual: CoupledResidual {
            max_excess: 0.0,
            support_gap: 0.0,
            ma_w1: 0.0,
        },
    };
    pot.residual = pot.residual_against(phi)?;
    Ok(CoupledSolution {
        value,
        potentials: pot,
        trace,
        accepted,
    })
}

fn hard_conj(x: &[f64], nodes: &[Vec<f64>], u: &[f64]) -> f64 {
    nodes
        .iter()
        .zip(u)
        .map(|(p, v)| dot(x, p) - v)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn lse(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|a| (a - m).exp()).sum::<f64>().ln()
}

/// Smoothed `f_φ` and its gradient in the conjugate parametrization.
fn smoothed(u: &[f64], tau: f64, xs: &[Vec<f64>], phix: &[f64], bs: &[Bundle], offsets: &[usize]) -> (f64, Vec<f64>) {
    let m = bs.len();
    // per x: soft conjugates and the log-normalizers needed for the gradient
    let per_x: Vec<(f64, Vec<f64>)> = xs
        .par_iter()
        .zip(phix.par_iter())
        .map(|(x, f)| {
            let mut tot = -f;
            let mut lses = Vec::with_capacity(m);
            for (j, b) in bs.iter().enumerate() {
                let uj = &u[offsets[j]..offsets[j] + b.nodes.len()];
                let a: Vec<f64> = b.nodes.iter().zip(uj).map(|(p, v)| (dot(x, p) - v) / tau).collect();
                let l = lse(&a);
                tot += tau * l;
                lses.push(l);
            }
            (tot / tau, lses)
        })
        .collect();
    let outer: Vec<f64> = per_x.iter().map(|(b, _)| *b).collect();
    let big = lse(&outer);
    let w: Vec<f64> = outer.iter().map(|b| (b - big).exp()).collect();
    let mut value = -tau * big;
    let mut grad = vec![0.0; u.len()];
    for (j, b) in bs.iter().enumerate() {
        let uj = &u[offsets[j]..offsets[j] + b.nodes.len()];
        value -= dot(&b.weights, uj);
        let parts: Vec<Vec<f64>> = xs
            .par_chunks(128)
            .zip(per_x.par_chunks(128))
            .zip(w.par_chunks(128))
            .map(|((xc, pc), wc)| {
                let mut acc = vec![0.0; b.nodes.len()];
                for ((x, (_, lses)), wx) in xc.iter().zip(pc).zip(wc) {
                    if *wx < 1e-300 {
                        continue;
                    }
                    for (i, (p, v)) in b.nodes.iter().zip(uj).enumerate() {
                        acc[i] += wx * ((dot(x, p) - v) / tau - lses[j]).exp();
                    }
                }
                acc
            })
            .collect();
        let gj = &mut grad[offsets[j]..offsets[j] + b.nodes.len()];
        for part in parts {
            for (g, a) in gj.iter_mut().zip(part) {
                *g += a;
            }
        }
        for (g, nw) in gj.iter_mut().zip(&b.weights) {
            *g -= nw;
        }
    }
    (value, grad)
}

/// x-marginal of the smoothed plans and the barycentric image of every
/// quadrature node of each `ν_j`.
fn plans(
    u: &[f64],
    tau: f64,
    xs: &[Vec<f64>],
    phix: &[f64],
    bs: &[Bundle],
    offsets: &[usize],
) -> (Vec<f64>, Vec<Vec<Vec<f64>>>) {
    let dim = xs[0].len();
    let outer: Vec<(f64, Vec<f64>)> = xs
        .iter()
        .zip(phix)
        .map(|(x, f)| {
            let mut tot = -f;
            let mut lses = Vec::new();
            for (j, b) in bs.iter().enumerate() {
                let uj = &u[offsets[j]..offsets[j] + b.nodes.len()];
                let a: Vec<f64> = b.nodes.iter().zip(uj).map(|(p, v)| (dot(x, p) - v) / tau).collect();
                let l = lse(&a);
                tot += tau * l;
                lses.push(l);
            }
            (tot / tau, lses)
        })
        .collect();
    let big = lse(&outer.iter().map(|o| o.0).collect::<Vec<_>>());
    let w: Vec<f64> = outer.iter().map(|o| (o.0 - big).exp()).collect();
    let maps = bs
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let uj = &u[offsets[j]..offsets[j] + b.nodes.len()];
            let mut mass = vec![0.0; b.nodes.len()];
            let mut moment = vec![vec![0.0; dim]; b.nodes.len()];
            for ((x, (_, lses)), wx) in xs.iter().zip(&outer).zip(&w) {
                if *wx < 1e-300 {
                    continue;
                }
                for (i, (p, v)) in b.nodes.iter().zip(uj).enumerate() {
                    let pi = wx * ((dot(x, p) - v) / tau - lses[j]).exp();
                    mass[i] += pi;
                    for a in 0..dim {
                        moment[i][a] += pi * x[a];
                    }
                }
            }
            moment
                .into_iter()
                .zip(mass)
                .map(|(mo, ma)| mo.into_iter().map(|v| v / ma).collect())
                .collect()
        })
        .collect();
    (w, maps)
}

/// Potentials with `MA(ψ_j) = μ` for intervals `P_j = [a_j, b_j]`:
/// `ψ_j'(x) = a_j + (b_j − a_j)·F_μ(x)`, normalized by `ψ_j(0) = 0`, sampled
/// on `grid`. Their sum is the designated `φ`, so the residuals vanish.
pub fn potentials_from_target_measure(
    mu: &DiscreteMeasure,
    intervals: &[LatticePolytope],
    grid: &Grid,
) -> Result<CoupledPotentials> {
    if mu.dim() != 1 || grid.dim() != 1 {
        return Err(Error::Unsupported("target-measure potentials are one-dimensional".into()));
    }
    if intervals.is_empty() {
        return Err(Error::Empty("interval list"));
    }
    if mu.is_empty() {
        return Err(Error::Empty("target measure"));
    }
    let (atoms, ws) = mu.sorted_1d()?;
    let base: f64 = atoms.iter().zip(&ws).map(|(x, w)| w * (-x).max(0.0)).sum();
    let ramp = |x: f64| atoms.iter().zip(&ws).map(|(a, w)| w * (x - a).max(0.0)).sum::<f64>() - base;
    let potentials = intervals
        .iter()
        .map(|p| {
            if p.dim() != 1 {
                return Err(Error::Unsupported("target-measure potentials are one-dimensional".into()));
            }
            let (a, b) = vertex_range_1d(p);
            GridFunction::sample(grid.clone(), |x| a * x[0] + (b - a) * ramp(x[0]), Some(p.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoupledPotentials {
        potentials,
        measure: mu.clone(),
        ma_measures: vec![mu.clone(); intervals.len()],
        residual: CoupledResidual {
            max_excess: 0.0,
            support_gap: 0.0,
            ma_w1: 0.0,
        },
    })
}

/// The potentials of [`potentials_from_target_measure`] as grid weights, and
/// their sum.
pub fn target_potentials_as_weights(pot: &CoupledPotentials) -> Result<(Vec<ToricWeight>, ToricWeight)> {
    let ws = pot
        .potentials
        .iter()
        .map(|f| {
            let p = f.asymptote().ok_or(Error::InvalidArgument("potential without asymptote".into()))?;
            ToricWeight::grid(p.clone(), f.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let sum = ToricWeight::sum(ws.clone())?;
    Ok((ws, sum))
}
