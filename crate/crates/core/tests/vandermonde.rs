use fekete_core::vandermonde::{grad_log_vd, log_vd, log_vd_with_shifts, product_objective};
use fekete_core::{BundleSpec, Configuration, LatticeBasis, LatticePolytope, Rational, ToricWeight};
use num_complex::Complex64;
use proptest::prelude::*;

fn config(dim: usize, coords: &[f64], n: usize) -> Configuration {
    let x = (0..n).map(|i| coords[i * dim..(i + 1) * dim].to_vec()).collect();
    let y = (0..n)
        .map(|i| coords[(n + i) * dim..(n + i + 1) * dim].iter().map(|t| t * std::f64::consts::PI).collect())
        .collect();
    Configuration::new(x, y).unwrap()
}

fn weights_2d() -> Vec<ToricWeight> {
    let sq = LatticePolytope::unit_square();
    vec![
        ToricWeight::lattice_log_sum_exp(sq.clone(), 1.0).unwrap(),
        ToricWeight::quadratic_blend(sq.clone(), 0.7).unwrap(),
        ToricWeight::support(sq),
    ]
}

fn weights_1d() -> Vec<ToricWeight> {
    let u = LatticePolytope::unit_interval();
    vec![
        ToricWeight::logistic(),
        ToricWeight::log_sum_exp(u.clone(), 0.5, vec![(vec![0.0], 2.0), (vec![1.0], 0.3)]).unwrap(),
        ToricWeight::quadratic_blend(u.clone(), 1.5).unwrap(),
        ToricWeight::support(u),
    ]
}

/// Leibniz expansion of the unscaled determinant.
fn naive_log_vd(c: &Configuration, basis: &LatticeBasis, phi: &ToricWeight) -> f64 {
    let n = basis.len();
    let entry = |i: usize, l: usize| {
        let p = &basis.points[l];
        let mut z = Complex64::new(0.0, 0.0);
        for (a, &pa) in p.iter().enumerate() {
            z += Complex64::new(c.x()[i][a], c.y()[i][a]) * pa as f64;
        }
        z.exp()
    };
    let mut det = Complex64::new(0.0, 0.0);
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        let mut inversions = 0;
        for a in 0..n {
            for b in a + 1..n {
                if perm[a] > perm[b] {
                    inversions += 1;
                }
            }
        }
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        det += (0..n).map(|i| entry(i, perm[i])).product::<Complex64>() * sign;
        // Next permutation in lexicographic order.
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
    let d = basis.dilation as f64;
    2.0 * det.norm().ln() - 2.0 * d * (0..n).map(|i| phi.value(&c.x()[i])).sum::<f64>()
}

#[test]
fn matches_unscaled_determinant() {
    let one = Rational::from_integer(1);
    for k in 1..=3u32 {
        let n = k as usize + 1;
        let coords: Vec<f64> = (0..2 * n).map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4).collect();
        let c = config(1, &coords, n);
        let b = LatticeBasis::new(&LatticePolytope::unit_interval(), k, one).unwrap();
        for w in weights_1d() {
            let (a, e) = (log_vd(&c, &b, &w).unwrap(), naive_log_vd(&c, &b, &w));
            assert!((a - e).abs() < 1e-10 * (1.0 + e.abs()), "k={k}: {a} vs {e}");
        }
    }
    let coords: Vec<f64> = (0..16).map(|i| (i as f64 * 0.77 + 0.2).sin()).collect();
    let c = config(2, &coords, 4);
    let b = LatticeBasis::new(&LatticePolytope::unit_square(), 1, one).unwrap();
    for w in weights_2d() {
        let (a, e) = (log_vd(&c, &b, &w).unwrap(), naive_log_vd(&c, &b, &w));
        assert!((a - e).abs() < 1e-10 * (1.0 + e.abs()), "{a} vs {e}");
    }
}

#[test]
fn two_identical_bundles_double_the_objective() {
    let b = BundleSpec::normalized(ToricWeight::logistic()).unwrap();
    let coords: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin()).collect();
    let c = config(1, &coords, 5);
    let one = product_objective(&c, std::slice::from_ref(&b), 4).unwrap();
    let two = product_objective(&c, &[b.clone(), b], 4).unwrap();
    assert!((two - 2.0 * one).abs() < 1e-12 * (1.0 + one.abs()));
}

#[test]
fn csv_roundtrip_is_exact() {
    let coords: Vec<f64> = (0..24).map(|i| (i as f64 * 1.3).cos() * 1e3f64.powi(i % 3 - 1)).collect();
    let c = config(2, &coords, 6);
    let back = Configuration::from_csv(&c.to_csv()).unwrap();
    assert_eq!(back.x(), c.x());
    assert_eq!(back.y(), c.y());
}

fn level_basis(dim: usize, k: u32) -> LatticeBasis {
    let p = if dim == 1 {
        LatticePolytope::unit_interval()
    } else {
        LatticePolytope::unit_square()
    };
    LatticeBasis::new(&p, k, Rational::from_integer(1)).unwrap()
}

fn instance() -> impl Strategy<Value = (usize, u32, Vec<f64>, usize)> {
    (1usize..=2, 1u32..=4, 0usize..4).prop_flat_map(|(dim, k, w)| {
        let k = if dim == 2 { k.min(2) } else { k };
        let n = level_basis(dim, k).len();
        (Just(dim), Just(k), prop::collection::vec(-1.0f64..1.0, 2 * n * dim), Just(w))
    })
}

fn weight(dim: usize, w: usize) -> ToricWeight {
    if dim == 1 {
        weights_1d()[w % 4].clone()
    } else {
        weights_2d()[w % 3].clone()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn row_scaling_invariance((dim, k, coords, w) in instance(), shifts in prop::collection::vec(-5.0f64..5.0, 9)) {
        let b = level_basis(dim, k);
        let c = config(dim, &coords, b.len());
        let phi = weight(dim, w);
        let base = log_vd(&c, &b, &phi).unwrap();
        prop_assume!(base.is_finite());
        let v = log_vd_with_shifts(&c, &b, &phi, &shifts[..b.len()]).unwrap();
        prop_assert!((v - base).abs() <= 1e-9 * (1.0 + base.abs()));
    }

    #[test]
    fn permutation_invariance((dim, k, coords, w) in instance(), seed in any::<u64>()) {
        let b = level_basis(dim, k);
        let n = b.len();
        let c = config(dim, &coords, n);
        let phi = weight(dim, w);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let a = log_vd(&c, &b, &phi).unwrap();
        prop_assume!(a.is_finite());
        let p = log_vd(&c.permuted(&perm).unwrap(), &b, &phi).unwrap();
        prop_assert!((a - p).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn weight_shift_covariance((dim, k, coords, w) in instance(), shift in -3.0f64..3.0) {
        let b = level_basis(dim, k);
        let c = config(dim, &coords, b.len());
        let phi = weight(dim, w);
        let a = log_vd(&c, &b, &phi).unwrap();
        prop_assume!(a.is_finite());
        let s = log_vd(&c, &b, &phi.clone().with_shift(shift)).unwrap();
        let expected = a - 2.0 * b.dilation as f64 * b.len() as f64 * shift;
        prop_assert!((s - expected).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn gradient_matches_central_differences((dim, k, coords, w) in instance()) {
        // Smooth weights only; the support function has kinks.
        let phi = weight(dim, w % 2);
        let b = level_basis(dim, k);
        let n = b.len();
        let c = config(dim, &coords, n);
        let base = log_vd(&c, &b, &phi).unwrap();
        prop_assume!(base.is_finite() && base > -40.0);
        let g = grad_log_vd(&c, &b, &phi).unwrap();
        let flat = c.to_flat();
        let h = 1e-5;
        let mut fd = vec![0.0; flat.len()];
        for i in 0..flat.len() {
            let mut p = flat.clone();
            p[i] += h;
            let up = log_vd(&Configuration::from_flat(dim, &p).unwrap(), &b, &phi).unwrap();
            p[i] -= 2.0 * h;
            let dn = log_vd(&Configuration::from_flat(dim, &p).unwrap(), &b, &phi).unwrap();
            fd[i] = (up - dn) / (2.0 * h);
        }
        let norm = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        let err = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-6 * norm, "err {err}, norm {norm}");
    }
}
