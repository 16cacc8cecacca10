//! Discrete optimal transport for the cost `c(x, y) = −<x, y>`, the
//! Wasserstein-1 distance, the bottleneck value `R`, and the perturbation
//! inequalities relating them.

pub mod bottleneck;
pub mod hungarian;
pub mod simplex;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{dist, dot, DiscreteMeasure};

#[derive(Clone, Debug, Serialize)]
pub struct AssignmentResult {
    /// `permutation[i] = σ(i)`.
    pub permutation: Vec<usize>,
    /// `−(1/N) Σ <x_i, p_σ(i)>`, recomputed from the inputs.
    pub cost: f64,
    pub unique: bool,
    /// Duals of the raw (unnormalized) cost matrix: `u_i + v_j ≤ −<x_i, p_j>`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl AssignmentResult {
    /// Largest violation of dual feasibility, `max(u_i + v_j − c_ij, 0)`.
    pub fn dual_violation(&self, x: &[Vec<f64>], p: &[Vec<f64>]) -> f64 {
        let mut worst = 0.0f64;
        for (i, xi) in x.iter().enumerate() {
            for (j, pj) in p.iter().enumerate() {
                worst = worst.max(self.u[i] + self.v[j] + dot(xi, pj));
            }
        }
        worst
    }
}

fn validate_points(x: &[Vec<f64>], p: &[Vec<f64>]) -> Result<usize> {
    if x.is_empty() || p.is_empty() {
        return Err(Error::Empty("point list"));
    }
    if x.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: p.len(),
        });
    }
    let dim = x[0].len();
    for q in x.iter().chain(p) {
        if q.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: q.len(),
            });
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("assignment input"));
        }
    }
    Ok(x.len())
}

fn cost_matrix(x: &[Vec<f64>], p: &[Vec<f64>]) -> Vec<f64> {
    x.iter().flat_map(|xi| p.iter().map(move |pj| -dot(xi, pj))).collect()
}

fn tie_eps(cost: &[f64]) -> f64 {
    1e-9 * (1.0 + cost.iter().fold(0.0f64, |m, c| m.max(c.abs())))
}

/// Optimal permutation for `C(δ^N(x), δ^N(p)) = min_σ −(1/N) Σ <x_i, p_σ(i)>`.
pub fn assignment(x: &[Vec<f64>], p: &[Vec<f64>]) -> Result<AssignmentResult> {
    let n = validate_points(x, p)?;
    let c = cost_matrix(x, p);
    let a = hungarian::solve(&c, n);
    let unique = !hungarian::has_alternating_cycle(&c, n, &a, tie_eps(&c));
    let raw: f64 = x.iter().zip(&a.row_to_col).map(|(xi, &j)| dot(xi, &p[j])).sum();
    Ok(AssignmentResult {
        permutation: a.row_to_col,
        cost: -raw / n as f64,
        unique,
        u: a.u,
        v: a.v,
    })
}

/// True iff the optimal permutation is unique.
pub fn uniqueness_probe(x: &[Vec<f64>], p: &[Vec<f64>]) -> Result<bool> {
    Ok(assignment(x, p)?.unique)
}

fn check_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    Ok(())
}

fn lp<F: Fn(&[f64], &[f64]) -> f64>(mu: &DiscreteMeasure, nu: &DiscreteMeasure, c: F) -> f64 {
    let cost: Vec<f64> = mu.points().flat_map(|x| nu.points().map(|y| c(x, y)).collect::<Vec<_>>()).collect();
    simplex::solve(mu.weights(), nu.weights(), &cost).cost
}

/// `min_γ ∫ −<x, y> dγ` over couplings, by the transportation simplex.
pub fn ot_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    check_pair(mu, nu)?;
    Ok(lp(mu, nu, |x, y| -dot(x, y)))
}

/// Exact discrete `W1`; the CDF formula in one dimension, the
/// transportation simplex otherwise.
pub fn wasserstein1(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    check_pair(mu, nu)?;
    if mu.dim() == 1 {
        wasserstein1_cdf(mu, nu)
    } else {
        Ok(lp(mu, nu, dist))
    }
}

/// `W1` through the transportation simplex in any dimension.
pub fn wasserstein1_lp(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    check_pair(mu, nu)?;
    Ok(lp(mu, nu, dist))
}

/// `∫ |F_μ − F_ν| dx` for one-dimensional measures.
pub fn wasserstein1_cdf(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    let (xa, wa) = mu.sorted_1d()?;
    let (xb, wb) = nu.sorted_1d()?;
    let mut ev: Vec<(f64, f64)> = xa.iter().zip(&wa).map(|(x, w)| (*x, *w)).collect();
    ev.extend(xb.iter().zip(&wb).map(|(x, w)| (*x, -*w)));
    ev.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for k in 0..ev.len() {
        diff += ev[k].1;
        if k + 1 < ev.len() {
            total += diff.abs() * (ev[k + 1].0 - ev[k].0);
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, Serialize)]
pub struct BottleneckResult {
    pub value: f64,
    /// Largest candidate distance at which no coupling exists; `value` is
    /// bounded below by it.
    pub largest_infeasible: Option<f64>,
}

/// `R(ν, ν') = inf_γ esssup_γ |p − q|` for uniform measures.
///
/// Cardinalities may differ: a coupling of `U{n atoms}` and `U{m atoms}`
/// restricted to pairs within distance `r` exists iff an integer flow with
/// `m` units per left atom and `n` units per right atom saturates.
pub fn bottleneck_r(nu: &DiscreteMeasure, nu2: &DiscreteMeasure) -> Result<BottleneckResult> {
    check_pair(nu, nu2)?;
    if !nu.is_uniform() || !nu2.is_uniform() {
        return Err(Error::Unsupported(
            "bottleneck R is implemented for uniform-weight measures only".into(),
        ));
    }
    let (n, m) = (nu.len(), nu2.len());
    let d: Vec<f64> = nu
        .points()
        .flat_map(|x| nu2.points().map(move |y| dist(x, y)).collect::<Vec<_>>())
        .collect();
    let (value, largest_infeasible) = bottleneck::search(&d, n, m);
    Ok(BottleneckResult {
        value,
        largest_infeasible,
    })
}

/// `max_t |Q_ν(t) − Q_ν'(t)|` for one-dimensional measures: the monotone
/// coupling also minimizes the largest displacement.
pub fn bottleneck_r_quantile(nu: &DiscreteMeasure, nu2: &DiscreteMeasure) -> Result<f64> {
    let (xa, wa) = nu.sorted_1d()?;
    let (xb, wb) = nu2.sorted_1d()?;
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (wa[0], wb[0]);
    let mut best = 0.0f64;
    loop {
        best = best.max((xa[i] - xb[j]).abs());
        let eps = 1e-13;
        if (ra - rb).abs() <= eps {
            i += 1;
            j += 1;
            if i == xa.len() || j == xb.len() {
                break;
            }
            ra = wa[i];
            rb = wb[j];
        } else if ra < rb {
            rb -= ra;
            i += 1;
            if i == xa.len() {
                break;
            }
            ra = wa[i];
        } else {
            ra -= rb;
            j += 1;
            if j == xb.len() {
                break;
            }
            rb = wb[j];
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Inequality {
    fn new(lhs: f64, rhs: f64) -> Self {
        let holds = lhs <= rhs + 1e-10 * (1.0 + rhs.abs());
        Self { lhs, rhs, holds }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PerturbationReport {
    /// `|C(μ,ν) − C(μ',ν)| ≤ W1(μ,μ')·esssup_ν |p|`.
    pub first_marginal: Inequality,
    /// `|C(μ,ν) − C(μ,ν')| ≤ (∫|x| dμ)·R(ν,ν')`.
    pub second_marginal: Inequality,
    pub satisfied: bool,
}

pub fn perturbation_report(
    mu: &DiscreteMeasure,
    mu2: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    nu2: &DiscreteMeasure,
) -> Result<PerturbationReport> {
    let c = ot_cost(mu, nu)?;
    let c_mu2 = ot_cost(mu2, nu)?;
    let c_nu2 = ot_cost(mu, nu2)?;
    let first = Inequality::new((c - c_mu2).abs(), wasserstein1(mu, mu2)? * nu.max_norm());
    let second = Inequality::new((c - c_nu2).abs(), mu.first_moment() * bottleneck_r(nu, nu2)?.value);
    Ok(PerturbationReport {
        satisfied: first.holds && second.holds,
        first_marginal: first,
        second_marginal: second,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&a| vec![a]).collect()
    }

    fn u1(v: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::uniform(1, v.to_vec()).unwrap()
    }

    #[test]
    fn assignment_examples() {
        let r = assignment(&pts(&[0.0, 1.0]), &pts(&[0.0, 1.0])).unwrap();
        assert_eq!(r.permutation, vec![0, 1]);
        assert_eq!(r.cost, -0.5);
        let r = assignment(&pts(&[1.0, 2.0, 3.0]), &pts(&[-1.0, 0.0, 1.0])).unwrap();
        assert_eq!(r.permutation, vec![0, 1, 2]);
        assert!((r.cost + 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn assignment_errors() {
        assert!(assignment(&[], &[]).is_err());
        assert!(assignment(&pts(&[f64::NAN]), &pts(&[0.0])).is_err());
        assert!(assignment(&pts(&[0.0]), &pts(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn uniqueness_examples() {
        assert!(!uniqueness_probe(&pts(&[0.0, 0.0]), &pts(&[0.0, 1.0])).unwrap());
        assert!(uniqueness_probe(&pts(&[-1.0, 1.0]), &pts(&[-1.0, 1.0])).unwrap());
    }

    #[test]
    fn ot_examples() {
        let a = DiscreteMeasure::dirac(&[1.0, 2.0]).unwrap();
        let b = DiscreteMeasure::dirac(&[3.0, -1.0]).unwrap();
        assert_eq!(ot_cost(&a, &b).unwrap(), -1.0);
        let x = [0.3, -1.2, 2.5, 0.9];
        let p = [1.0, 0.1, -0.7, 0.4];
        let direct = assignment(&pts(&x), &pts(&p)).unwrap().cost;
        assert!((ot_cost(&u1(&x), &u1(&p)).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn w1_examples() {
        assert_eq!(wasserstein1(&u1(&[0.0]), &u1(&[1.0])).unwrap(), 1.0);
        let m = u1(&[0.1, 0.5, 0.7]);
        assert_eq!(wasserstein1(&m, &m).unwrap(), 0.0);
    }

    #[test]
    fn bottleneck_examples() {
        let r = bottleneck_r(&u1(&[0.0, 1.0]), &u1(&[0.1, 0.9])).unwrap();
        assert!((r.value - 0.1).abs() < 1e-15);
        assert_eq!(bottleneck_r(&u1(&[0.2, 0.4]), &u1(&[0.2, 0.4])).unwrap().value, 0.0);
        let w = DiscreteMeasure::new(1, vec![0.0, 1.0], vec![0.3, 0.7]).unwrap();
        assert!(matches!(bottleneck_r(&w, &u1(&[0.0, 1.0])), Err(Error::Unsupported(_))));
    }

    #[test]
    fn bottleneck_unequal_cardinality_matches_quantile() {
        let a = u1(&[0.0, 0.5, 1.0]);
        let b = u1(&[0.1, 0.2, 0.35, 0.6, 0.8, 0.95]);
        let flow = bottleneck_r(&a, &b).unwrap().value;
        let quant = bottleneck_r_quantile(&a, &b).unwrap();
        assert!((flow - quant).abs() < 1e-15, "{flow} vs {quant}");
    }

    #[test]
    fn translation_family() {
        let mu = u1(&[0.2, -0.4, 1.1]);
        let nu = u1(&[0.3, 0.9, 0.5]);
        let t = 0.37;
        let rep = perturbation_report(&mu, &mu.translate(&[t]).unwrap(), &nu, &nu).unwrap();
        let mean = nu.mean()[0];
        assert!((rep.first_marginal.lhs - (t * mean).abs()).abs() < 1e-9);
        assert!(rep.satisfied);
    }

    proptest! {
        #[test]
        fn w1_metric_axioms(a in proptest::collection::vec(-3.0f64..3.0, 1..6),
                            b in proptest::collection::vec(-3.0f64..3.0, 1..6),
                            c in proptest::collection::vec(-3.0f64..3.0, 1..6)) {
            let (ma, mb, mc) = (u1(&a), u1(&b), u1(&c));
            let ab = wasserstein1_lp(&ma, &mb).unwrap();
            let ba = wasserstein1_lp(&mb, &ma).unwrap();
            let ac = wasserstein1_lp(&ma, &mc).unwrap();
            let cb = wasserstein1_lp(&mc, &mb).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ab <= ac + cb + 1e-9);
            prop_assert!((ab - wasserstein1_cdf(&ma, &mb).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn assignment_scale_equivariance(x in proptest::collection::vec(-5.0f64..5.0, 5), p in proptest::collection::vec(-5.0f64..5.0, 5), alpha in 0.1f64..10.0) {
            let a = assignment(&pts(&x), &pts(&p)).unwrap();
            let xs: Vec<f64> = x.iter().map(|v| v * alpha).collect();
            let b = assignment(&pts(&xs), &pts(&p)).unwrap();
            if a.unique {
                prop_assert_eq!(&a.permutation, &b.permutation);
            }
            prop_assert!((b.cost - alpha * a.cost).abs() <= 1e-9 * (1.0 + b.cost.abs()));
        }
    }
}
