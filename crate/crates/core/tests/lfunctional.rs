use fekete_core::fekete::FeketeOptions;
use fekete_core::lfunctional::{
    expansion, fiber_integral_check, l2_sup_gap, lk_estimate, mina_check, LkOptions, Reference, DEFAULT_BUDGET,
};
use fekete_core::quadrature::{log_trapezoid, periodic_mean};
use fekete_core::{BundleSpec, Error, LatticeBasis, LatticePolytope, Rational, ToricWeight};
use num_complex::Complex64;
use proptest::prelude::*;

fn bases_1d(levels: &[u32]) -> Vec<LatticeBasis> {
    levels
        .iter()
        .map(|&k| LatticeBasis::new(&LatticePolytope::unit_interval(), k, Rational::from_integer(1)).unwrap())
        .collect()
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

#[test]
fn counts_cover_all_permutation_tuples() {
    for levels in [vec![1], vec![3], vec![1, 1], vec![2, 1], vec![2, 2, 1], vec![3, 3]] {
        let bases = bases_1d(&levels);
        let t = expansion(&bases, DEFAULT_BUDGET).unwrap();
        let tuples: u128 = bases.iter().map(|b| factorial(b.len())).product();
        assert_eq!(t.total_count(), tuples);
        assert_eq!(t.tuples, tuples);
        for e in &t.entries {
            assert!(e.signed_sum.unsigned_abs() <= e.count);
        }
    }
    let sq = LatticeBasis::new(&LatticePolytope::unit_square(), 1, Rational::from_integer(1)).unwrap();
    let t = expansion(&[sq.clone(), sq], DEFAULT_BUDGET).unwrap();
    assert_eq!(t.total_count(), 24 * 24);
}

#[test]
fn mina_on_tie_hyperplane() {
    // Equal coordinates make the assignment non-unique.
    let bases = bases_1d(&[2, 2]);
    for x in [vec![vec![0.3], vec![0.3], vec![-1.0]], vec![vec![0.0], vec![0.0], vec![0.0]]] {
        let r = mina_check(&x, &bases, 2, DEFAULT_BUDGET).unwrap();
        assert!(r.difference <= 1e-9, "{r:?}");
    }
}

/// `k = 1`, `P = [0, 1]`, `φ = h_P`, Gaussian reference: integrates the
/// torus average of `|e^{z_2} − e^{z_1}|² e^{−2φ(x_1) − 2φ(x_2)}` on a 2-D
/// grid, with the average over `y_2 − y_1` taken numerically. The kink sits
/// on a node at both spacings, so one Richardson step removes the `h²` term.
fn support_oracle() -> f64 {
    let rho = |t: f64| -0.5 * t * t - 0.5 * std::f64::consts::TAU.ln();
    let integral = |nodes: usize| {
        log_trapezoid(&[-10.0, -10.0], &[10.0, 10.0], nodes, |x| {
            let avg = periodic_mean(1, 16, |y| {
                let d = Complex64::new(x[1], y[0]).exp() - Complex64::new(x[0], 0.0).exp();
                d.norm_sqr()
            });
            avg.ln() - 2.0 * x[0].max(0.0) - 2.0 * x[1].max(0.0) + rho(x[0]) + rho(x[1])
        })
        .unwrap()
        .exp()
    };
    let i = (4.0 * integral(2001) - integral(1001)) / 3.0;
    -i.ln() / 4.0
}

#[test]
fn support_weight_against_quadrature_oracle() {
    let b = BundleSpec::normalized(ToricWeight::support(LatticePolytope::unit_interval())).unwrap();
    let oracle = support_oracle();
    let exact = lk_estimate(std::slice::from_ref(&b), 1, &LkOptions::exact(Reference::Gaussian, 1)).unwrap();
    assert!((exact.value - oracle).abs() < 1e-8, "{} vs {oracle}", exact.value);
    let mc = lk_estimate(&[b], 1, &LkOptions::monte_carlo(Reference::Gaussian, 1, 200_000, 7)).unwrap();
    assert!(mc.stderr > 0.0);
    assert!((mc.value - oracle).abs() <= 3.0 * mc.stderr, "{} ± {} vs {oracle}", mc.value, mc.stderr);
}

#[test]
fn weight_shift_moves_lk_by_the_shift() {
    // The integrand carries e^{−2dNc}, normalized by 2kN with d = k.
    let c = 0.37;
    for reference in [Reference::Gaussian, Reference::Logistic] {
        let base = BundleSpec::normalized(ToricWeight::logistic()).unwrap();
        let shifted = BundleSpec::normalized(ToricWeight::logistic().with_shift(c)).unwrap();
        let opts = LkOptions::monte_carlo(reference, 1, 4000, 3);
        let a = lk_estimate(std::slice::from_ref(&base), 3, &opts).unwrap();
        let s = lk_estimate(std::slice::from_ref(&shifted), 3, &opts).unwrap();
        assert!((s.value - a.value - c).abs() < 1e-9);
        let opts = LkOptions::exact(reference, 1);
        let a = lk_estimate(&[base], 3, &opts).unwrap();
        let s = lk_estimate(&[shifted], 3, &opts).unwrap();
        assert!((s.value - a.value - c).abs() < 1e-9);
    }
}

#[test]
fn lk_needs_unit_volume() {
    let b = BundleSpec::normalized(ToricWeight::support(LatticePolytope::integer_interval(0, 2).unwrap())).unwrap();
    let r = lk_estimate(&[b], 2, &LkOptions::exact(Reference::Gaussian, 1));
    assert!(matches!(r, Err(Error::Unsupported(_))));
}

#[test]
fn single_bundle_gap_is_nonnegative() {
    let b = BundleSpec::normalized(ToricWeight::logistic()).unwrap();
    for k in [1, 2, 3] {
        let g = l2_sup_gap(
            std::slice::from_ref(&b),
            k,
            None,
            &LkOptions::exact(Reference::Logistic, 1),
            &FeketeOptions::default(),
        )
        .unwrap();
        assert!(g.gap >= 0.0, "{g:?}");
    }
}

fn small_bases() -> impl Strategy<Value = Vec<LatticeBasis>> {
    prop_oneof![
        (1u32..=3).prop_map(|k| bases_1d(&[k])),
        (1u32..=3, 1u32..=3).prop_map(|(a, b)| bases_1d(&[a, b])),
        (1u32..=2, 1u32..=2, 1u32..=2).prop_map(|(a, b, c)| bases_1d(&[a, b, c])),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fiber_integral_matches_expansion(bases in small_bases(), xs in prop::collection::vec(-1.5f64..1.5, 4)) {
        let x: Vec<Vec<f64>> = xs.iter().map(|&t| vec![t]).collect();
        let r = fiber_integral_check(&x, &bases).unwrap();
        prop_assert!(r.relative_error <= 1e-6, "{r:?}");
    }

    #[test]
    fn fiber_integral_matches_expansion_2d(xs in prop::collection::vec(-1.0f64..1.0, 4)) {
        // Two points of the unit square: N·n = 4, the torus quadrature limit.
        let b = LatticeBasis {
            level: 1,
            scale: Rational::from_integer(1),
            dilation: 1,
            points: vec![vec![0, 0], vec![1, 1]],
        };
        let x = vec![xs[0..2].to_vec(), xs[2..4].to_vec()];
        let r = fiber_integral_check(&x, &[b]).unwrap();
        prop_assert!(r.relative_error <= 1e-6, "{r:?}");
    }

    #[test]
    fn mina_identity(bases in small_bases(), xs in prop::collection::vec(-3.0f64..3.0, 4)) {
        let k = bases[0].level;
        prop_assume!(bases.iter().all(|b| b.level == k));
        let x: Vec<Vec<f64>> = xs.iter().map(|&t| vec![t]).collect();
        let r = mina_check(&x, &bases, k, DEFAULT_BUDGET).unwrap();
        prop_assert!(r.difference <= 1e-9 * (1.0 + r.expansion_side.abs()), "{r:?}");
    }

    #[test]
    fn mina_identity_2d(xs in prop::collection::vec(-2.0f64..2.0, 8)) {
        let sq = LatticeBasis::new(&LatticePolytope::unit_square(), 1, Rational::from_integer(1)).unwrap();
        let x: Vec<Vec<f64>> = xs.chunks(2).map(<[f64]>::to_vec).collect();
        let r = mina_check(&x, &[sq.clone(), sq], 1, DEFAULT_BUDGET).unwrap();
        prop_assert!(r.difference <= 1e-9 * (1.0 + r.expansion_side.abs()), "{r:?}");
    }
}
