use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fekete_core::lfunctional::expansion;
use fekete_core::transport::assignment;
use fekete_core::vandermonde::log_vd;
use fekete_core::{convexity, BundleSpec, Configuration, LatticeBasis, LatticePolytope, Rational, ToricWeight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn points(rng: &mut ChaCha8Rng, n: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| scale * rng.random::<f64>()).collect()).collect()
}

fn bench_assignment(c: &mut Criterion) {
    let mut g = c.benchmark_group("assignment");
    for n in [16usize, 64, 256] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let x = points(&mut rng, n, 2, 1.0);
        let p = points(&mut rng, n, 2, 1.0);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| assignment(&x, &p).unwrap()));
    }
    g.finish();
}

fn bench_log_vd(c: &mut Criterion) {
    let mut g = c.benchmark_group("log_vd");
    let square = LatticePolytope::unit_square();
    let phi = ToricWeight::lattice_log_sum_exp(square.clone(), 1.0).unwrap();
    for k in [4u32, 8, 16] {
        let basis = LatticeBasis::new(&square, k, Rational::from_integer(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let n = basis.len();
        let x = points(&mut rng, n, 2, 2.0);
        let y = points(&mut rng, n, 2, std::f64::consts::TAU);
        let config = Configuration::new(x, y).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, _| {
            b.iter(|| log_vd(&config, &basis, &phi).unwrap())
        });
    }
    g.finish();
}

fn bench_legendre(c: &mut Criterion) {
    let mut g = c.benchmark_group("legendre");
    let interval = LatticePolytope::unit_interval();
    let square = LatticePolytope::unit_square();
    let logistic = ToricWeight::logistic();
    let lse = ToricWeight::lattice_log_sum_exp(square.clone(), 1.0).unwrap();
    for res in [256usize, 1024] {
        g.bench_with_input(BenchmarkId::new("1d", res), &res, |b, &r| {
            b.iter(|| convexity::weight_conjugate(&logistic, &interval, r).unwrap())
        });
    }
    for res in [16usize, 32] {
        g.bench_with_input(BenchmarkId::new("2d", res), &res, |b, &r| {
            b.iter(|| convexity::weight_conjugate(&lse, &square, r).unwrap())
        });
    }
    g.finish();
}

fn bench_expansion(c: &mut Criterion) {
    let mut g = c.benchmark_group("expansion");
    let spec = BundleSpec::normalized(ToricWeight::logistic()).unwrap();
    for k in [2u32, 3, 4] {
        let basis = spec.basis(k).unwrap();
        let bases = vec![basis.clone(), basis];
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, _| {
            b.iter(|| expansion(&bases, u128::MAX).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_assignment, bench_log_vd, bench_legendre, bench_expansion);
criterion_main!(benches);
