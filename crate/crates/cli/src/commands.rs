//! One function per subcommand. Each returns the artifacts it produced and
//! any failed verification checks; the orchestrator writes them.

use fekete_core::convexity::{
    coupled_energy, equilibrium_energy, equilibrium_measure, project, weight_conjugate, CoupledOptions,
    CoupledSolution,
};
use fekete_core::fekete::{
    equidistribution_report, maximize_product, mutual_fekete_certify, CertifyOptions, FeketeOptions, FeketeRun,
};
use fekete_core::lfunctional::{
    expansion, fiber_integral_check, l2_sup_gap, lk_estimate, mina_check, ExpansionTable, LkOptions,
};
use fekete_core::polytope::RationalLit;
use fekete_core::transport::{
    assignment, bottleneck_r, bottleneck_r_quantile, wasserstein1, wasserstein1_cdf,
};
use fekete_core::{BundleSpec, DiscreteMeasure, LatticeBasis, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::artifacts::{Artifact, Outputs};
use crate::config::ExperimentConfig;
use crate::CliError;

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn bases(bundles: &[BundleSpec], k: u32) -> Result<Vec<LatticeBasis>, CliError> {
    bundles
        .iter()
        .enumerate()
        .map(|(j, b)| b.basis(k).map_err(|e| CliError::core(format!("polytope: bundle {j} at k={k}"), e)))
        .collect()
}

fn fekete_options(cfg: &ExperimentConfig) -> FeketeOptions {
    FeketeOptions {
        restarts: cfg.restarts,
        seed: cfg.seed,
        half_width: cfg.half_width,
        ..FeketeOptions::default()
    }
}

fn energies(cfg: &ExperimentConfig, bundles: &[BundleSpec]) -> Result<Vec<f64>, CliError> {
    let res = cfg.energy_res()?;
    bundles
        .iter()
        .enumerate()
        .map(|(j, b)| {
            equilibrium_energy(&b.weight, &b.polytope, res).map_err(|e| CliError::core(format!("convexity: bundle {j}"), e))
        })
        .collect()
}

pub fn lattice(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let bundles = cfg.bundle_specs()?;
    let mut out = Outputs::default();
    for &k in &cfg.ks {
        let bs = bases(&bundles, k)?;
        let per: Vec<Value> = bundles
            .iter()
            .zip(&bs)
            .map(|(b, basis)| {
                json!({
                    "volume": RationalLit::from_rational(b.polytope.volume()),
                    "c": b.c,
                    "scale": RationalLit::from_rational(b.scale),
                    "dilation": basis.dilation,
                    "N": basis.len(),
                    "points": basis.points,
                })
            })
            .collect();
        let n_hat = bs.iter().map(LatticeBasis::len).max().unwrap_or(0);
        out.push(Artifact::new("polytope", "lattice", Some(k), json!({ "bundles": per, "N_hat": n_hat })));
    }
    Ok(out)
}

pub fn legendre(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let bundles = cfg.bundle_specs()?;
    let res = cfg.energy_res()?;
    let mut out = Outputs::default();
    let mut per = Vec::new();
    let mut files = Vec::new();
    for (j, b) in bundles.iter().enumerate() {
        let ctx = || format!("convexity: bundle {j}");
        let conj = weight_conjugate(&b.weight, &b.polytope, res).map_err(|e| CliError::core(ctx(), e))?;
        let proj = project(&b.weight, &b.polytope, res).map_err(|e| CliError::core(ctx(), e))?;
        per.push(json!({
            "res": res,
            "projection_convex": proj.is_convex_along_lines(1e-9),
        }));
        files.push((format!("legendre_conjugate_{j}.csv"), conj.to_csv()));
        files.push((format!("legendre_projection_{j}.csv"), proj.to_csv()));
    }
    let i = out.push(Artifact::new("convexity", "legendre", None, json!({ "bundles": per })));
    for (n, c) in files {
        out.attach_csv(i, n, c);
    }
    Ok(out)
}

pub fn eqmeasure(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let bundles = cfg.bundle_specs()?;
    let res = cfg.energy_res()?;
    let mut out = Outputs::default();
    let mut per = Vec::new();
    let mut files = Vec::new();
    for (j, b) in bundles.iter().enumerate() {
        let eq = equilibrium_measure(&b.weight, &b.polytope, res)
            .map_err(|e| CliError::core(format!("convexity: bundle {j}"), e))?;
        per.push(json!({
            "atoms": eq.measure.len(),
            "mass": eq.measure.total_mass(),
            "mean": eq.measure.mean(),
            "first_moment": eq.measure.first_moment(),
            "flagged": eq.flagged,
        }));
        files.push((format!("eqmeasure_{j}.csv"), eq.measure.to_csv()));
    }
    let i = out.push(Artifact::new("convexity", "eqmeasure", None, json!({ "res": res, "bundles": per })));
    for (n, c) in files {
        out.attach_csv(i, n, c);
    }
    Ok(out)
}

pub fn energy(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let bundles = cfg.bundle_specs()?;
    let e = energies(cfg, &bundles)?;
    let mut out = Outputs::default();
    out.push(Artifact::new("convexity", "energy", None, json!({ "res": cfg.energy_res()?, "energies": e })));
    Ok(out)
}

fn solve_coupled(cfg: &ExperimentConfig) -> Result<CoupledSolution, CliError> {
    let polys = cfg.polytopes()?;
    let res = cfg.coupled_res()?;
    let phi = cfg.phi()?;
    let list: Vec<_> = polys.into_iter().map(|p| (p, res)).collect();
    coupled_energy(&phi, &list, &CoupledOptions::for_dim(cfg.dim()?)).map_err(|e| CliError::core("convexity: coupled", e))
}

pub fn coupled(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let sol = solve_coupled(cfg)?;
    let phi = cfg.phi()?;
    let r = &sol.potentials.residual;
    let tol = cfg.tolerances.coupled;
    let mut out = Outputs::default();
    if !r.within(tol) {
        out.failures.push(format!(
            "coupled: residuals {:e}/{:e}/{:e} exceed {tol:e}",
            r.max_excess, r.support_gap, r.ma_w1
        ));
    }
    let i = out.push(Artifact::new(
        "convexity",
        "coupled",
        None,
        json!({
            "value": sol.value,
            "bundles": sol.potentials.potentials.len(),
            "residual": { "max_excess": r.max_excess, "support_gap": r.support_gap, "ma_w1": r.ma_w1 },
            "within_tol": r.within(tol),
            "trace": sol.trace,
            "accepted": sol.accepted,
        }),
    ));
    let pots = &sol.potentials.potentials;
    let grid = pots[0].grid();
    let mut csv = String::new();
    for a in 0..grid.dim() {
        csv.push_str(&format!("x{a},"));
    }
    for j in 0..pots.len() {
        csv.push_str(&format!("psi_{j},"));
    }
    csv.push_str("sum,phi\n");
    for x in grid.nodes() {
        for c in &x {
            csv.push_str(&format!("{c:.16e},"));
        }
        for p in pots {
            csv.push_str(&format!("{:.16e},", p.eval(&x)));
        }
        csv.push_str(&format!("{:.16e},{:.16e}\n", sol.potentials.sum_at(&x), phi.value(&x)));
    }
    out.attach_csv(i, "coupled_potentials.csv".into(), csv);
    out.attach_csv(i, "coupled_measure.csv".into(), sol.potentials.measure.to_csv());
    Ok(out)
}

fn uniform(points: &[Vec<f64>]) -> Result<DiscreteMeasure, CliError> {
    DiscreteMeasure::empirical(points).map_err(|e| CliError::core("transport", e))
}

pub fn ot(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let spec = cfg
        .ot
        .as_ref()
        .ok_or_else(|| CliError::Schema("ot: the config needs an \"ot\" section".into()))?;
    let mut out = Outputs::default();
    if let Some(a) = &spec.assignment {
        let ctx = |e| CliError::core("transport: assignment", e);
        let r = assignment(&a.x, &a.p).map_err(ctx)?;
        let (mu, nu) = (uniform(&a.x)?, uniform(&a.p)?);
        let w1 = wasserstein1(&mu, &nu).map_err(ctx)?;
        let w1_cdf = if mu.dim() == 1 { Some(wasserstein1_cdf(&mu, &nu).map_err(ctx)?) } else { None };
        let br = bottleneck_r(&mu, &nu).map_err(ctx)?;
        out.push(Artifact::new(
            "transport",
            "assignment",
            None,
            json!({
                "permutation": r.permutation,
                "cost": r.cost,
                "unique": r.unique,
                "dual_violation": r.dual_violation(&a.x, &a.p),
                "w1": w1,
                "w1_cdf": w1_cdf,
                "bottleneck_r": br.value,
            }),
        ));
    }
    if let Some(b) = &spec.bottleneck {
        let poly = cfg.polytopes()?.remove(0);
        if poly.dim() != 1 {
            return Err(CliError::Schema("ot.bottleneck: the first bundle must be an interval".into()));
        }
        let ctx = |e| CliError::core("transport: bottleneck", e);
        let nu_m = poly.uniform_measure(b.m).map_err(ctx)?;
        let verts = poly.vertices_f64();
        let len = (verts[1][0] - verts[0][0]).abs();
        let mut rows = Vec::new();
        let mut values = Vec::new();
        for &k in &b.ks {
            let basis = LatticeBasis::new(&poly, k, Rational::from_integer(1)).map_err(ctx)?;
            let nu = uniform(&basis.scaled_points())?;
            let r = bottleneck_r(&nu, &nu_m).map_err(ctx)?.value;
            let q = bottleneck_r_quantile(&nu, &nu_m).map_err(ctx)?;
            let bound = len / (2.0 * k as f64) + len / (2.0 * b.m as f64) + 1e-12;
            if r > bound {
                out.failures.push(format!("bottleneck: R = {r} > {bound} at k = {k}"));
            }
            rows.push(json!({ "k": k, "r": r, "r_quantile": q, "bound": bound, "within_bound": r <= bound }));
            values.push(r);
        }
        let decreasing = values.windows(2).all(|w| w[1] < w[0]);
        if !decreasing {
            out.failures.push("bottleneck: R not decreasing in k".into());
        }
        out.push(Artifact::new(
            "transport",
            "bottleneck",
            None,
            json!({ "m": b.m, "levels": rows, "decreasing": decreasing }),
        ));
    }
    if out.artifacts.is_empty() {
        return Err(CliError::Schema("ot: give \"assignment\" and/or \"bottleneck\"".into()));
    }
    Ok(out)
}

fn sample_points(cfg: &ExperimentConfig, k: u32, n: usize, dim: usize) -> Result<Vec<Vec<f64>>, CliError> {
    if let Some(p) = &cfg.points {
        if p.len() < n || p.iter().any(|q| q.len() != dim) {
            return Err(CliError::Schema(format!("points: need {n} points of dimension {dim}")));
        }
        return Ok(p[..n].to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(k as u64);
    Ok((0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect()).collect())
}

fn table_csv(t: &ExpansionTable) -> String {
    let mut s = String::from("a,signed_sum,count,coefficient\n");
    for e in &t.entries {
        let a: Vec<String> = e
            .a
            .iter()
            .map(|p| p.iter().map(i64::to_string).collect::<Vec<_>>().join(":"))
            .collect();
        s.push_str(&format!("{},{},{},{}\n", a.join(" "), e.signed_sum, e.count, e.coefficient()));
    }
    s
}

fn expansion_level(cfg: &ExperimentConfig, bundles: &[BundleSpec], k: u32) -> Result<Outputs, CliError> {
    let bs = bases(bundles, k)?;
    let dim = cfg.dim()?;
    let n_hat = bs.iter().map(LatticeBasis::len).max().unwrap_or(0);
    let budget = cfg.budget as u128;
    let ctx = |e| CliError::core(format!("lfunctional: expansion at k={k}"), e);
    let table = expansion(&bs, budget).map_err(ctx)?;
    let x = sample_points(cfg, k, n_hat, dim)?;
    let mut out = Outputs::default();
    let fiber = if n_hat * dim <= 4 {
        let r = fiber_integral_check(&x, &bs).map_err(ctx)?;
        if !(r.relative_error <= cfg.tolerances.fiber) {
            out.failures.push(format!("fiber integral at k={k}: relative error {:e}", r.relative_error));
        }
        to_value(&r)
    } else {
        Value::String(format!("skipped: N·n = {} exceeds the torus quadrature limit 4", n_hat * dim))
    };
    let mina = mina_check(&x, &bs, k, budget).map_err(ctx)?;
    if !(mina.difference <= cfg.tolerances.mina * (1.0 + mina.expansion_side.abs())) {
        out.failures.push(format!("cost identity at k={k}: difference {:e}", mina.difference));
    }
    let i = out.push(Artifact::new(
        "lfunctional",
        "expansion",
        Some(k),
        json!({
            "N_hat": n_hat,
            "tuples": table.tuples.to_string(),
            "total_count": table.total_count().to_string(),
            "terms": table.entries.len(),
            "points": x,
            "fiber": fiber,
            "mina": to_value(&mina),
        }),
    ));
    out.attach_csv(i, format!("lfunctional_expansion_k{k}.csv"), table_csv(&table));
    Ok(out)
}

pub fn expansion_cmd(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let bundles = cfg.bundle_specs()?;
    let mut out = Outputs::default();
    for &k in &cfg.ks {
        out.extend(expansion_level(cfg, &bundles, k)?);
    }
    Ok(out)
}

fn lk_options(cfg: &ExperimentConfig, dim: usize) -> LkOptions {
    let mut o = match cfg.samples {
        Some(s) => LkOptions::monte_carlo(cfg.reference, dim, s, cfg.seed),
        None => LkOptions::exact(cfg.reference, dim),
    };
    o.budget = cfg.budget as u128;
    o
}

pub fn lk(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let bundles = cfg.bundle_specs()?;
    let opts = lk_options(cfg, cfg.dim()?);
    let target = solve_coupled(cfg)?.value;
    let mut out = Outputs::default();
    let mut dist = Vec::new();
    for &k in &cfg.ks {
        let r = lk_estimate(&bundles, k, &opts).map_err(|e| CliError::core(format!("lfunctional: L_k at k={k}"), e))?;
        dist.push((r.value - target).abs());
        out.push(Artifact::new("lfunctional", "lk", Some(k), to_value(&r)));
        if cfg.gap {
            let g = l2_sup_gap(&bundles, k, None, &opts, &fekete_options(cfg))
                .map_err(|e| CliError::core(format!("lfunctional: gap at k={k}"), e))?;
            out.push(Artifact::new("lfunctional", "gap", Some(k), to_value(&g)));
        }
    }
    let decreasing = dist.windows(2).all(|w| w[1] < w[0]);
    out.push(Artifact::new(
        "lfunctional",
        "lk_trend",
        None,
        json!({ "ks": cfg.ks, "coupled_energy": target, "distance": dist, "decreasing": decreasing }),
    ));
    Ok(out)
}

fn run_json(run: &FeketeRun, deficits: &[f64]) -> Value {
    json!({
        "objective": run.objective,
        "N_hat": run.n_hat,
        "seed": run.seed,
        "half_width": run.half_width,
        "restart_objectives": run.restart_objectives,
        "best_restart": run.best_restart,
        "iterations": run.trace.len(),
        "angle_spread": run.angle_spread,
        "deficits": deficits,
    })
}

pub fn fekete(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let bundles = cfg.bundle_specs()?;
    let opts = fekete_options(cfg);
    let e = energies(cfg, &bundles)?;
    let runs: Vec<FeketeRun> = cfg
        .ks
        .par_iter()
        .map(|&k| maximize_product(&bundles, k, &opts).map_err(|e| CliError::core(format!("fekete: k={k}"), e)))
        .collect::<Result<_, _>>()?;
    let mut out = Outputs::default();
    for run in &runs {
        let d = bundles
            .iter()
            .zip(&e)
            .map(|(b, &en)| run.deficit(b, en))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::core("fekete: deficit", e))?;
        let i = out.push(Artifact::new("fekete", "run", Some(run.k), run_json(run, &d)));
        out.attach_csv(i, format!("fekete_run_k{}_config.csv", run.k), run.config.to_csv());
        out.attach_csv(i, format!("fekete_run_k{}_trace.csv", run.k), run.trace_csv());
    }
    let res = cfg.energy_res()?;
    let mut reports = Vec::new();
    for (j, b) in bundles.iter().enumerate() {
        let ctx = |e| CliError::core(format!("fekete: equidistribution, bundle {j}"), e);
        let target = equilibrium_measure(&b.weight, &b.polytope, res).map_err(ctx)?.measure;
        reports.push(to_value(&equidistribution_report(&runs, &target).map_err(ctx)?));
    }
    out.push(Artifact::new("fekete", "equidistribution", None, json!({ "bundles": reports })));
    Ok(out)
}

pub fn certify(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let bundles = cfg.bundle_specs()?;
    let dim = cfg.dim()?;
    let mut opts = CertifyOptions::new(cfg.ks.clone(), cfg.tolerances.certify, dim);
    opts.fekete = fekete_options(cfg);
    if let Some(r) = cfg.res {
        opts.res = r;
    }
    let cert = mutual_fekete_certify(&bundles, &opts).map_err(|e| CliError::core("fekete: certify", e))?;
    let mut out = Outputs::default();
    if !cert.verdict {
        out.failures.extend(cert.failures.iter().map(|f| format!("certify: {f}")));
    }
    let i = out.push(Artifact::new("fekete", "certify", None, to_value(&cert)));
    out.attach_csv(i, "fekete_certify.csv".into(), cert.to_csv());
    Ok(out)
}

/// Every check the config supports, in one run.
pub fn verify_all(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let bundles = cfg.bundle_specs()?;
    let mut out = Outputs::default();
    let mut checks = Vec::new();
    let mut record = |out: &mut Outputs, name: String, sub: Outputs| {
        checks.push(json!({ "check": name, "passed": sub.failures.is_empty(), "failures": sub.failures.clone() }));
        out.extend(sub);
    };

    out.extend(lattice(cfg)?);

    // The expansion is enumerable only at small levels.
    for &k in &cfg.ks {
        let bs = bases(&bundles, k)?;
        let tuples = bs.iter().try_fold(1u128, |acc, b| {
            (1..=b.len() as u128).try_fold(acc, |a, f| a.checked_mul(f))
        });
        if tuples.is_some_and(|t| t <= cfg.budget as u128) {
            record(&mut out, format!("expansion k={k}"), expansion_level(cfg, &bundles, k)?);
        }
    }

    let e = energies(cfg, &bundles)?;
    let res = cfg.coupled_res()?;
    let mut collapse = Outputs::default();
    for (j, b) in bundles.iter().enumerate() {
        let f = coupled_energy(&b.weight, &[(b.polytope.clone(), res)], &CoupledOptions::for_dim(cfg.dim()?))
            .map_err(|e| CliError::core(format!("convexity: collapse, bundle {j}"), e))?;
        let direct = equilibrium_energy(&b.weight, &b.polytope, res)
            .map_err(|e| CliError::core(format!("convexity: bundle {j}"), e))?;
        let err = (f.value - direct).abs();
        if !(err <= cfg.tolerances.collapse) {
            collapse.failures.push(format!("bundle {j}: single-bundle coupled energy off by {err:e}"));
        }
    }
    collapse.push(Artifact::new("convexity", "energy", None, json!({ "res": cfg.energy_res()?, "energies": e })));
    record(&mut out, "single-bundle collapse".into(), collapse);

    record(&mut out, "coupled residuals".into(), coupled(cfg)?);
    record(&mut out, "certify".into(), certify(cfg)?);

    let passed = checks.iter().all(|c| c["passed"] == Value::Bool(true));
    out.push(Artifact::new("verify", "all", None, json!({ "checks": checks, "passed": passed })));
    Ok(out)
}
