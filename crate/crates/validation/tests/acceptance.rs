//! Acceptance criteria 1 to 11, one line each. Exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use fekete_core::convexity::{
    coupled_energy, equilibrium_energy, project, weight_conjugate, CoupledOptions,
};
use fekete_core::fekete::{maximize_product, mutual_fekete_certify, CertifyOptions, FeketeOptions};
use fekete_core::lfunctional::{
    expansion, fiber_integral_check, lk_estimate, mina_check, LkOptions, Reference, DEFAULT_BUDGET,
};
use fekete_core::transport::{assignment, bottleneck_r, bottleneck_r_quantile, perturbation_report};
use fekete_core::{BundleSpec, DiscreteMeasure, LatticeBasis, LatticePolytope, Rational, ToricWeight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn unit_basis(k: u32) -> LatticeBasis {
    LatticeBasis::new(&LatticePolytope::unit_interval(), k, Rational::from_integer(1)).unwrap()
}

fn interval_basis(a: i64, k: u32) -> LatticeBasis {
    LatticeBasis::new(&LatticePolytope::integer_interval(0, a).unwrap(), k, Rational::from_integer(1)).unwrap()
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

fn points(rng: &mut ChaCha8Rng, n: usize, dim: usize, r: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-r..r)).collect()).collect()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for t in 0..50 {
        let m = rng.random_range(1..=3usize);
        let bases: Vec<LatticeBasis> = (0..m)
            .map(|_| {
                if rng.random_bool(0.25) {
                    interval_basis(2, 1)
                } else {
                    unit_basis(rng.random_range(1..=3))
                }
            })
            .collect();
        let n = bases.iter().map(LatticeBasis::len).max().unwrap();
        let x = points(&mut rng, n, 1, 1.5);
        let r = fiber_integral_check(&x, &bases).map_err(|e| format!("instance {t}: {e}"))?;
        worst = worst.max(r.relative_error);
        let table = expansion(&bases, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
        let tuples: u128 = bases.iter().map(|b| factorial(b.len())).product();
        if table.total_count() != tuples {
            return Err(format!("instance {t}: Σ|S_a| = {} ≠ {tuples}", table.total_count()));
        }
        for e in &table.entries {
            if e.signed_sum.unsigned_abs() > e.count || e.coefficient() != (e.signed_sum as i128).pow(2) as u128 {
                return Err(format!("instance {t}: bad coefficient at {:?}", e.a));
            }
        }
    }
    check(worst <= 1e-6, format!("worst relative error {worst:.2e} over 50 instances"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for t in 0..50 {
        let m = rng.random_range(1..=3usize);
        let k = rng.random_range(1..=4u32);
        let bases: Vec<LatticeBasis> = (0..m)
            .map(|_| if 2 * k < 5 && rng.random_bool(0.3) { interval_basis(2, k) } else { unit_basis(k) })
            .collect();
        let n = bases.iter().map(LatticeBasis::len).max().unwrap();
        let x = points(&mut rng, n, 1, 3.0);
        let r = mina_check(&x, &bases, k, DEFAULT_BUDGET).map_err(|e| format!("instance {t}: {e}"))?;
        worst = worst.max(r.difference / (1.0 + r.expansion_side.abs()));
    }
    check(worst <= 1e-9, format!("worst relative difference {worst:.2e} over 50 instances"))
}

/// Heap's algorithm.
fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0; n];
    f(&p);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            f(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for t in 0..200 {
        let n = rng.random_range(1..=8usize);
        let dim = rng.random_range(1..=2usize);
        let ints = |rng: &mut ChaCha8Rng| -> Vec<Vec<i64>> {
            (0..n).map(|_| (0..dim).map(|_| rng.random_range(-9..=9)).collect()).collect()
        };
        let (xi, pi) = (ints(&mut rng), ints(&mut rng));
        let pair = |i: usize, j: usize| -> i64 { xi[i].iter().zip(&pi[j]).map(|(a, b)| a * b).sum() };
        let mut best = i64::MIN;
        for_each_permutation(n, |s| best = best.max((0..n).map(|i| pair(i, s[i])).sum()));
        let to_f = |v: &Vec<Vec<i64>>| v.iter().map(|q| q.iter().map(|&c| c as f64).collect()).collect::<Vec<Vec<f64>>>();
        let r = assignment(&to_f(&xi), &to_f(&pi)).map_err(|e| e.to_string())?;
        let got: i64 = (0..n).map(|i| pair(i, r.permutation[i])).sum();
        if got != best || r.cost != -(best as f64) / n as f64 {
            return Err(format!("instance {t}: solver {got}, brute force {best}"));
        }
    }
    Ok("200 instances match brute force exactly".into())
}

fn uniform(pts: Vec<Vec<f64>>) -> DiscreteMeasure {
    let dim = pts[0].len();
    DiscreteMeasure::uniform(dim, pts.concat()).unwrap()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for t in 0..200 {
        let dim = rng.random_range(1..=2usize);
        let draw = |rng: &mut ChaCha8Rng| {
            let n = rng.random_range(1..=8usize);
            uniform(points(rng, n, dim, 2.0))
        };
        let (mu, mu2, nu, nu2) = (draw(&mut rng), draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let r = perturbation_report(&mu, &mu2, &nu, &nu2).map_err(|e| e.to_string())?;
        if !r.satisfied {
            return Err(format!("quadruple {t}: {r:?}"));
        }
    }
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=8usize);
        let mu = uniform(points(&mut rng, n, 1, 2.0));
        let n2 = rng.random_range(1..=8usize);
        let nu = uniform(points(&mut rng, n2, 1, 2.0));
        let tr = rng.random_range(-3.0..3.0);
        let r = perturbation_report(&mu, &mu.translate(&[tr]).unwrap(), &nu, &nu).map_err(|e| e.to_string())?;
        worst = worst.max((r.first_marginal.lhs - (tr * nu.mean()[0]).abs()).abs());
    }
    check(worst <= 1e-9, format!("200 quadruples hold; translation family error {worst:.2e}"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut unique = 0;
    for _ in 0..1000 {
        let mut g = || -> Vec<Vec<f64>> {
            (0..6).map(|_| (0..2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect()
        };
        let (x, p) = (g(), g());
        if assignment(&x, &p).map_err(|e| e.to_string())?.unique {
            unique += 1;
        }
    }
    let degenerate = assignment(&[vec![0.0], vec![0.0]], &[vec![0.0], vec![1.0]]).map_err(|e| e.to_string())?;
    check(
        unique == 1000 && !degenerate.unique,
        format!("uniqueness frequency {:.3}; x = (0, 0) unique = {}", unique as f64 / 1000.0, degenerate.unique),
    )
}

fn criterion_6() -> Outcome {
    let m = 4096;
    let nu_m = LatticePolytope::unit_interval().uniform_measure(m).map_err(|e| e.to_string())?;
    let mut rs = Vec::new();
    let mut detail = Vec::new();
    let mut stated = true;
    let mut companion = true;
    for k in [8u32, 16, 32, 64] {
        let nu = uniform(unit_basis(k).scaled_points());
        let r = bottleneck_r(&nu, &nu_m).map_err(|e| e.to_string())?.value;
        let q = bottleneck_r_quantile(&nu, &nu_m).map_err(|e| e.to_string())?;
        if (r - q).abs() > 1e-12 {
            return Err(format!("k = {k}: flow route {r} and quantile route {q} disagree"));
        }
        let kf = k as f64;
        let bound = 1.0 / (2.0 * kf) + 1.0 / (2.0 * m as f64) + 1e-12;
        stated &= r <= bound;
        companion &= r <= 1.0 / (kf + 1.0) + 1.0 / (2.0 * m as f64) + 1e-12;
        detail.push(format!("k={k}: R={r:.6} bound {bound:.6}"));
        rs.push(r);
    }
    let decreasing = rs.windows(2).all(|w| w[1] < w[0]);
    check(
        decreasing && stated,
        format!(
            "{}; decreasing {decreasing}; R ≤ 1/(k+1) + 1/(2M) holds {companion}",
            detail.join(", ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let res = 512;
    let sym = LatticePolytope::integer_interval(-1, 1).map_err(|e| e.to_string())?;
    let unit = LatticePolytope::unit_interval();
    let quad = ToricWeight::quadratic(sym.clone(), 1.0).map_err(|e| e.to_string())?;
    let e_quad = equilibrium_energy(&quad, &sym, res).map_err(|e| e.to_string())?;
    let e_log = equilibrium_energy(&ToricWeight::logistic(), &unit, res).map_err(|e| e.to_string())?;
    let e_sup = equilibrium_energy(&ToricWeight::support(unit.clone()), &unit, res).map_err(|e| e.to_string())?;
    let conj = weight_conjugate(&ToricWeight::logistic(), &unit, res).map_err(|e| e.to_string())?;
    let entropy = |p: &[f64]| {
        let xlogx = |t: f64| if t > 0.0 { t * t.ln() } else { 0.0 };
        0.5 * (xlogx(p[0]) + xlogx(1.0 - p[0]))
    };
    let legendre = conj.sup_distance(entropy);
    let proj = project(&quad, &sym, res).map_err(|e| e.to_string())?;
    let huber = proj.sup_distance(|x| {
        let a = x[0].abs();
        if a <= 1.0 {
            0.5 * a * a
        } else {
            a - 0.5
        }
    });
    let errs = [(e_quad + 1.0 / 6.0).abs(), (e_log - 0.25).abs(), e_sup.abs(), legendre, huber];
    check(
        errs.iter().all(|e| *e <= 1e-4),
        format!(
            "E(x²/2) {e_quad:.8}, E(logistic) {e_log:.8}, E(h_P) {e_sup:.1e}, conjugate error {legendre:.1e}, projection error {huber:.1e}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let unit = LatticePolytope::unit_interval();
    let phi = ToricWeight::sum(vec![ToricWeight::logistic(), ToricWeight::logistic()]).map_err(|e| e.to_string())?;
    let opts = CoupledOptions::for_dim(1);
    let f = coupled_energy(&phi, &[(unit.clone(), 256), (unit.clone(), 256)], &opts).map_err(|e| e.to_string())?;
    let r = &f.potentials.residual;
    let e = equilibrium_energy(&ToricWeight::logistic(), &unit, 256).map_err(|e| e.to_string())?;
    let one = coupled_energy(&ToricWeight::logistic(), &[(unit, 256)], &opts).map_err(|e| e.to_string())?;
    let collapse = (one.value - e).abs();
    check(
        f.value >= 0.5 - 1e-3 && r.within(1e-3) && collapse <= 1e-6,
        format!(
            "F = {:.7}, residuals {:.1e}/{:.1e}/{:.1e}, m=1 collapse error {collapse:.1e}",
            f.value, r.max_excess, r.support_gap, r.ma_w1
        ),
    )
}

fn criterion_9() -> Outcome {
    let b = BundleSpec::normalized(ToricWeight::logistic()).map_err(|e| e.to_string())?;
    let opts = LkOptions::exact(Reference::Logistic, 1);
    let mut gaps = Vec::new();
    let mut last = None;
    for k in [4u32, 8, 16] {
        let r = lk_estimate(std::slice::from_ref(&b), k, &opts).map_err(|e| e.to_string())?;
        gaps.push((r.value - 0.25).abs());
        last = Some(r);
    }
    let r = last.unwrap();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    check(
        decreasing && gaps[2] <= 3.0 * r.stderr + 0.05,
        format!("|L_k − 1/4| = {:.5}, {:.5}, {:.5} ({} route)", gaps[0], gaps[1], gaps[2], r.method),
    )
}

fn criterion_10() -> Outcome {
    let unit = LatticePolytope::unit_interval();
    let logistic = BundleSpec::normalized(ToricWeight::logistic()).map_err(|e| e.to_string())?;
    let support = BundleSpec::normalized(ToricWeight::support(unit)).map_err(|e| e.to_string())?;
    let opts = CertifyOptions::new(vec![4, 8, 16, 32], 0.1, 1);
    let cert = mutual_fekete_certify(&[logistic.clone(), logistic.clone()], &opts).map_err(|e| e.to_string())?;
    let w1_ok = cert.w1.iter().all(|w| w.windows(2).all(|s| s[1] <= s[0]) && w[w.len() - 1] <= 0.1);
    let control = mutual_fekete_certify(&[logistic, support], &opts).map_err(|e| e.to_string())?;
    let fmt = |v: &[f64]| v.iter().map(|t| format!("{t:.4}")).collect::<Vec<_>>().join(" ");
    check(
        cert.verdict && w1_ok && !control.verdict,
        format!(
            "W1 [{}], deficits [{}], verdict {}; negative control verdict {} ({})",
            fmt(&cert.w1[0]),
            fmt(&cert.deficits[0]),
            cert.verdict,
            control.verdict,
            control.failures.join("; ")
        ),
    )
}

fn traces(threads: usize) -> Result<String, String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
    pool.install(|| {
        let b = BundleSpec::normalized(ToricWeight::logistic()).map_err(|e| e.to_string())?;
        let opts = FeketeOptions { seed: 42, ..FeketeOptions::default() };
        let run = maximize_product(&[b.clone(), b.clone()], 8, &opts).map_err(|e| e.to_string())?;
        let cert = mutual_fekete_certify(
            &[b.clone(), b.clone()],
            &CertifyOptions { fekete: opts, ..CertifyOptions::new(vec![4, 8], 0.1, 1) },
        )
        .map_err(|e| e.to_string())?;
        let lk = lk_estimate(&[b], 4, &LkOptions::monte_carlo(Reference::Gaussian, 1, 20_000, 42)).map_err(|e| e.to_string())?;
        Ok(format!(
            "{}{}{}{}",
            run.trace_csv(),
            run.config.to_csv(),
            cert.to_csv(),
            serde_json::to_string(&lk).map_err(|e| e.to_string())?
        ))
    })
}

fn criterion_11() -> Outcome {
    let a = traces(1)?;
    let b = traces(4)?;
    let c = traces(4)?;
    check(
        a == b && b == c,
        format!("{} trace bytes identical across reruns and 1 vs 4 worker threads", a.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let mut failed = 0;
    for (n, f) in criteria {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("criterion {n}: PASS ({d}) [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("criterion {n}: FAIL ({d}) [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
