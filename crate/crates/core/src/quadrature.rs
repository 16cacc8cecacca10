//! Trapezoid rules in log space and periodic averages over the torus.

use crate::error::{Error, Result};

/// `log Σ e^{v_i}`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|a| (a - m).exp()).sum::<f64>().ln()
}

/// `log ∫ e^{g}` over the box `[low, high]` by the tensor trapezoid rule with
/// `nodes` points per axis. `g` is the log-integrand.
pub fn log_trapezoid<G: Fn(&[f64]) -> f64>(low: &[f64], high: &[f64], nodes: usize, g: G) -> Result<f64> {
    let dim = low.len();
    if dim == 0 || high.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: high.len(),
        });
    }
    if nodes < 2 {
        return Err(Error::InvalidArgument("trapezoid rule needs at least two nodes".into()));
    }
    let h: Vec<f64> = (0..dim).map(|a| (high[a] - low[a]) / (nodes - 1) as f64).collect();
    let total = nodes.pow(dim as u32);
    let mut terms = Vec::with_capacity(total);
    let mut x = vec![0.0; dim];
    for flat in 0..total {
        let mut rem = flat;
        let mut logw = 0.0;
        for a in (0..dim).rev() {
            let i = rem % nodes;
            rem /= nodes;
            x[a] = if i == nodes - 1 { high[a] } else { low[a] + i as f64 * h[a] };
            logw += h[a].ln();
            if i == 0 || i == nodes - 1 {
                logw -= std::f64::consts::LN_2;
            }
        }
        terms.push(logw + g(&x));
    }
    let v = log_sum_exp(&terms);
    if v.is_nan() {
        return Err(Error::Quadrature("non-finite log-integrand".into()));
    }
    Ok(v)
}

/// Mean of `f` over `[0, 2π)^dim` on the uniform grid with `q` nodes per
/// axis; exact for trigonometric polynomials of degree below `q`.
pub fn periodic_mean<F: FnMut(&[f64]) -> f64>(dim: usize, q: usize, mut f: F) -> f64 {
    let step = std::f64::consts::TAU / q as f64;
    let total = q.pow(dim as u32);
    let mut y = vec![0.0; dim];
    let mut acc = 0.0;
    for flat in 0..total {
        let mut rem = flat;
        for a in (0..dim).rev() {
            y[a] = (rem % q) as f64 * step;
            rem /= q;
        }
        acc += f(&y);
    }
    acc / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_integral() {
        let v = log_trapezoid(&[-12.0], &[12.0], 2001, |x| -0.5 * x[0] * x[0]).unwrap();
        assert!((v - (2.0 * std::f64::consts::PI).sqrt().ln()).abs() < 1e-12);
        let v2 = log_trapezoid(&[-12.0, -12.0], &[12.0, 12.0], 401, |x| -0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        assert!((v2 - (2.0 * std::f64::consts::PI).ln()).abs() < 1e-10);
    }

    #[test]
    fn periodic_exact_on_trig_polynomials() {
        let m = periodic_mean(2, 7, |y| (1.0 + (2.0 * y[0]).cos() + (y[0] - 3.0 * y[1]).sin()).powi(2));
        assert!((m - 2.0).abs() < 1e-12);
    }
}
