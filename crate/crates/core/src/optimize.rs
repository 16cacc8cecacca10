//! Limited-memory BFGS ascent with Armijo backtracking and optional
//! projection onto a feasible set.

use std::collections::VecDeque;

#[derive(Clone, Copy, Debug)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the sup-norm of the (projected) gradient falls below this.
    pub grad_tol: f64,
    /// Stop when the objective gain over one iteration falls below
    /// `f_tol * (1 + |f|)`.
    pub f_tol: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 500,
            grad_tol: 1e-9,
            f_tol: 1e-14,
            max_backtracks: 40,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Objective after every accepted step, starting with the initial value.
    pub trace: Vec<f64>,
    pub converged: bool,
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximizes `f`, which returns `(value, gradient)`; a value of `-inf` marks
/// an infeasible point and triggers backtracking. `project` maps a trial
/// point back into the feasible set in place.
pub fn maximize<F, P>(mut f: F, x0: Vec<f64>, opts: &LbfgsOptions, project: P) -> LbfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
    P: Fn(&mut [f64]),
{
    let mut x = x0;
    project(&mut x);
    let (mut fx, mut g) = f(&x);
    let mut trace = vec![fx];
    if !fx.is_finite() {
        return LbfgsResult {
            x,
            value: fx,
            iterations: 0,
            trace,
            converged: false,
        };
    }
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = false;
    let mut iterations = 0;
    let n = x.len();

    for it in 0..opts.max_iter {
        iterations = it + 1;
        let gnorm = projected_grad_norm(&x, &g, &project);
        if gnorm <= opts.grad_tol {
            converged = true;
            break;
        }
        // two-loop recursion on the ascent problem: H approximates (−∇²f)⁻¹
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dotv(s, &q);
            for i in 0..n {
                q[i] -= a * y[i];
            }
            alphas.push(a);
        }
        let gamma = hist
            .back()
            .map(|(s, y, _)| dotv(s, y) / dotv(y, y))
            .unwrap_or_else(|| 1.0 / g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300));
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dotv(y, &q);
            for i in 0..n {
                q[i] += (a - b) * s[i];
            }
        }
        let mut d = q;
        if dotv(&d, &g) <= 0.0 {
            hist.clear();
            let scale = 1.0 / g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            d = g.iter().map(|v| v * scale).collect();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let mut xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            project(&mut xt);
            let moved: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
            let gain = dotv(&g, &moved);
            if gain <= 0.0 && moved.iter().all(|v| *v == 0.0) {
                break;
            }
            let (ft, gt) = f(&xt);
            if ft.is_finite() && ft >= fx + 1e-4 * gain.max(0.0) && ft >= fx {
                accepted = Some((xt, ft, gt, moved));
                break;
            }
            step *= 0.5;
        }
        let Some((xt, ft, gt, s)) = accepted else {
            converged = hist.is_empty();
            if !hist.is_empty() {
                hist.clear();
                continue;
            }
            break;
        };
        // curvature pair for the minimization of −f
        let y: Vec<f64> = g.iter().zip(&gt).map(|(a, b)| a - b).collect();
        let sy = dotv(&s, &y);
        if sy > 1e-12 * dotv(&s, &s).sqrt() * dotv(&y, &y).sqrt() {
            hist.push_back((s, y, 1.0 / sy));
            if hist.len() > opts.memory {
                hist.pop_front();
            }
        }
        let gain = ft - fx;
        x = xt;
        fx = ft;
        g = gt;
        trace.push(fx);
        if gain <= opts.f_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
    }
    LbfgsResult {
        x,
        value: fx,
        iterations,
        trace,
        converged,
    }
}

fn projected_grad_norm<P: Fn(&mut [f64])>(x: &[f64], g: &[f64], project: &P) -> f64 {
    let mut xt: Vec<f64> = x.iter().zip(g).map(|(a, b)| a + b).collect();
    project(&mut xt);
    xt.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Clamps every coordinate selected by `mask` into `[-b, b]`.
pub fn box_projector(mask: Vec<bool>, b: f64) -> impl Fn(&mut [f64]) {
    move |x: &mut [f64]| {
        for (v, m) in x.iter_mut().zip(&mask) {
            if *m {
                *v = v.clamp(-b, b);
            }
        }
    }
}
