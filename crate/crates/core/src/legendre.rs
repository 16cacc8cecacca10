//! Linear-time discrete Legendre transform (lower hull + slope merge), and its
//! separable extension to two dimensions.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Result of `sup_x <x,p> − f(x)` over grid nodes, for a list of slopes.
#[derive(Clone, Debug)]
pub struct Conjugate {
    pub values: Vec<f64>,
    /// Maximizer per slope; the midpoint of the maximizing segment on ties.
    pub argmax: Vec<Vec<f64>>,
    /// Grid index of a maximizing node per axis.
    pub argmax_index: Vec<Vec<usize>>,
    pub ties: Vec<bool>,
}

struct Conj1 {
    values: Vec<f64>,
    argmax: Vec<f64>,
    lo: Vec<usize>,
    tie: Vec<bool>,
}

/// 1-D transform; `xs` strictly increasing, `slopes` ascending.
fn conjugate_1d(xs: &[f64], f: &[f64], slopes: &[f64]) -> Conj1 {
    let mut hull: Vec<usize> = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b if it lies on or above the chord a..i
            let lhs = (f[b] - f[a]) * (xs[i] - xs[a]);
            let rhs = (f[i] - f[a]) * (xs[b] - xs[a]);
            if lhs >= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let seg: Vec<f64> = hull
        .windows(2)
        .map(|w| (f[w[1]] - f[w[0]]) / (xs[w[1]] - xs[w[0]]))
        .collect();
    let mut out = Conj1 {
        values: Vec::with_capacity(slopes.len()),
        argmax: Vec::with_capacity(slopes.len()),
        lo: Vec::with_capacity(slopes.len()),
        tie: Vec::with_capacity(slopes.len()),
    };
    let mut k = 0;
    for &p in slopes {
        while k < seg.len() && seg[k] < p {
            k += 1;
        }
        let i = hull[k];
        out.values.push(p * xs[i] - f[i]);
        out.lo.push(i);
        let tie = k < seg.len() && (seg[k] - p).abs() <= 1e-12 * (1.0 + p.abs());
        if tie {
            out.argmax.push(0.5 * (xs[i] + xs[hull[k + 1]]));
        } else {
            out.argmax.push(xs[i]);
        }
        out.tie.push(tie);
    }
    out
}

fn check_sorted(s: &[f64]) -> Result<()> {
    if s.windows(2).any(|w| w[0] > w[1]) || s.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("slopes must be finite and ascending".into()));
    }
    Ok(())
}

/// `sup_{x ∈ grid} <x,p> − f(x)` for all `p` in the product of `slope_axes`.
/// Output is row-major over the slope product, last axis fastest.
pub fn conjugate_on_axes(grid: &Grid, f: &[f64], slope_axes: &[Vec<f64>]) -> Result<Conjugate> {
    if slope_axes.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: slope_axes.len(),
        });
    }
    if f.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: f.len(),
        });
    }
    for s in slope_axes {
        check_sorted(s)?;
    }
    match grid.dim() {
        1 => {
            let xs = grid.axis(0);
            let c = conjugate_1d(&xs, f, &slope_axes[0]);
            Ok(Conjugate {
                values: c.values,
                argmax: c.argmax.into_iter().map(|a| vec![a]).collect(),
                argmax_index: c.lo.into_iter().map(|i| vec![i]).collect(),
                ties: c.tie,
            })
        }
        _ => {
            let x0 = grid.axis(0);
            let x1 = grid.axis(1);
            let (n0, n1) = (x0.len(), x1.len());
            let (p0, p1) = (&slope_axes[0], &slope_axes[1]);
            let m1 = p1.len();
            // pass 1: rows of fixed x0, transform over x1
            let rows: Vec<Conj1> = (0..n0)
                .map(|i| conjugate_1d(&x1, &f[i * n1..(i + 1) * n1], p1))
                .collect();
            let mut values = vec![0.0; p0.len() * m1];
            let mut argmax = vec![Vec::new(); p0.len() * m1];
            let mut argmax_index = vec![Vec::new(); p0.len() * m1];
            let mut ties = vec![false; p0.len() * m1];
            // pass 2: for each p1, transform −g(·, p1) over x0
            let mut col = vec![0.0; n0];
            for j in 0..m1 {
                for i in 0..n0 {
                    col[i] = -rows[i].values[j];
                }
                let c = conjugate_1d(&x0, &col, p0);
                for (a, _) in p0.iter().enumerate() {
                    let idx = a * m1 + j;
                    let i = c.lo[a];
                    values[idx] = c.values[a];
                    argmax[idx] = vec![c.argmax[a], rows[i].argmax[j]];
                    argmax_index[idx] = vec![i, rows[i].lo[j]];
                    ties[idx] = c.tie[a] || rows[i].tie[j];
                }
            }
            Ok(Conjugate {
                values,
                argmax,
                argmax_index,
                ties,
            })
        }
    }
}

/// `sup_{p ∈ S} <x,p> − g(p)` over an explicit finite slope set `S` (rows of
/// `points`), evaluated at each `x` of `xs`. Used for the back-transform of
/// a conjugate restricted to a non-box polytope.
pub fn conjugate_of_samples(points: &[Vec<f64>], g: &[f64], xs: &[Vec<f64>]) -> Vec<(f64, usize)> {
    xs.iter()
        .map(|x| {
            let mut best = (f64::NEG_INFINITY, 0);
            for (i, (p, gv)) in points.iter().zip(g).enumerate() {
                let v: f64 = x.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() - gv;
                if v > best.0 {
                    best = (v, i);
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(xs: &[f64], f: &[f64], p: f64) -> f64 {
        xs.iter().zip(f).map(|(x, v)| p * x - v).fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn matches_brute_force_on_nonconvex_input() {
        let g = Grid::uniform(&[-3.0], &[3.0], 301).unwrap();
        let xs = g.axis(0);
        let f: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin() + 0.3 * x * x).collect();
        let slopes: Vec<f64> = (0..97).map(|i| -2.0 + i as f64 * 0.04).collect();
        let c = conjugate_on_axes(&g, &f, std::slice::from_ref(&slopes)).unwrap();
        for (p, v) in slopes.iter().zip(&c.values) {
            assert!((v - brute(&xs, &f, *p)).abs() < 1e-12);
        }
    }

    #[test]
    fn tie_midpoint() {
        let g = Grid::uniform(&[-2.0], &[2.0], 5).unwrap();
        let f: Vec<f64> = g.axis(0).iter().map(|x| x.abs()).collect();
        let c = conjugate_on_axes(&g, &f, &[vec![1.0]]).unwrap();
        assert!(c.ties[0]);
        assert_eq!(c.argmax[0], vec![1.0]);
        assert_eq!(c.values[0], 0.0);
    }

    #[test]
    fn separable_matches_brute_force_2d() {
        let g = Grid::uniform(&[-2.0, -1.5], &[2.0, 1.5], 41).unwrap();
        let f: Vec<f64> = g.nodes().map(|x| 0.5 * x[0] * x[0] + x[0] * x[1] * 0.3 + x[1].powi(4)).collect();
        let p0: Vec<f64> = (0..9).map(|i| -1.0 + 0.25 * i as f64).collect();
        let p1: Vec<f64> = (0..7).map(|i| -0.9 + 0.3 * i as f64).collect();
        let c = conjugate_on_axes(&g, &f, &[p0.clone(), p1.clone()]).unwrap();
        let nodes: Vec<Vec<f64>> = g.nodes().collect();
        for (a, pa) in p0.iter().enumerate() {
            for (b, pb) in p1.iter().enumerate() {
                let exact = nodes
                    .iter()
                    .zip(&f)
                    .map(|(x, v)| pa * x[0] + pb * x[1] - v)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!((c.values[a * p1.len() + b] - exact).abs() < 1e-12);
            }
        }
    }
}
