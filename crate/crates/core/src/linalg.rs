//! Dense complex LU with partial pivoting.

use num_complex::Complex64;

pub type C64 = Complex64;

#[derive(Clone, Debug)]
pub struct ComplexLu {
    n: usize,
    lu: Vec<C64>,
    perm: Vec<usize>,
    /// `log |det|` from the pivot magnitudes; `-inf` when singular.
    pub log_abs_det: f64,
    pub singular: bool,
}

/// Factorizes the row-major `n × n` matrix `a`. A pivot below
/// `n · 4ε · max|a_ij|` marks the matrix numerically singular.
pub fn lu(mut a: Vec<C64>, n: usize) -> ComplexLu {
    debug_assert_eq!(a.len(), n * n);
    let scale = a.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let thresh = n as f64 * 4.0 * f64::EPSILON * scale;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut log_abs_det = 0.0;
    let mut singular = scale == 0.0 || !scale.is_finite();
    for k in 0..n {
        let (piv, pmag) = (k..n)
            .map(|r| (r, a[r * n + k].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmag <= thresh {
            singular = true;
            break;
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            perm.swap(k, piv);
        }
        log_abs_det += pmag.ln();
        let d = a[k * n + k];
        for r in k + 1..n {
            let f = a[r * n + k] / d;
            a[r * n + k] = f;
            if f != C64::new(0.0, 0.0) {
                for c in k + 1..n {
                    let t = a[k * n + c];
                    a[r * n + c] -= f * t;
                }
            }
        }
    }
    if singular {
        log_abs_det = f64::NEG_INFINITY;
    }
    ComplexLu {
        n,
        lu: a,
        perm,
        log_abs_det,
        singular,
    }
}

impl ComplexLu {
    /// Solves `A x = b`.
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut x: Vec<C64> = self.perm.iter().map(|&i| b[i]).collect();
        for r in 0..n {
            for c in 0..r {
                let t = self.lu[r * n + c] * x[c];
                x[r] -= t;
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                let t = self.lu[r * n + c] * x[c];
                x[r] -= t;
            }
            x[r] /= self.lu[r * n + r];
        }
        x
    }

    /// Row-major inverse.
    pub fn inverse(&self) -> Vec<C64> {
        let n = self.n;
        let mut inv = vec![C64::new(0.0, 0.0); n * n];
        let mut e = vec![C64::new(0.0, 0.0); n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            e[c] = C64::new(1.0, 0.0);
            let col = self.solve(&e);
            for r in 0..n {
                inv[r * n + c] = col[r];
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_2x2() {
        let a = vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0)];
        let f = lu(a, 2);
        assert!((f.log_abs_det - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn repeated_rows_singular() {
        let r = [C64::new(0.3, 0.1), C64::new(-0.2, 0.5)];
        let f = lu(vec![r[0], r[1], r[0], r[1]], 2);
        assert!(f.singular);
        assert_eq!(f.log_abs_det, f64::NEG_INFINITY);
    }

    #[test]
    fn inverse_roundtrip() {
        let n = 4;
        let a: Vec<C64> = (0..n * n)
            .map(|k| C64::new(((k * 7) % 5) as f64 - 2.0, ((k * 3) % 4) as f64 * 0.5))
            .collect();
        let f = lu(a.clone(), n);
        let inv = f.inverse();
        for r in 0..n {
            for c in 0..n {
                let s: C64 = (0..n).map(|k| a[r * n + k] * inv[k * n + c]).sum();
                let e = if r == c { 1.0 } else { 0.0 };
                assert!((s - C64::new(e, 0.0)).norm() < 1e-12);
            }
        }
    }
}
