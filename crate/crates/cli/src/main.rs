//! `fekete`: experiment runner for weighted Vandermonde products over toric
//! line bundles.
//!
//! Exit status: 0 on success, 2 when a verification check fails, 1 on usage,
//! configuration or I/O errors.

// `!(x <= tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod artifacts;
mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::artifacts::{report_bundle, to_json, write_file, Outputs, METADATA, SUMMARY};
use crate::config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("config: {0}")]
    Schema(String),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: fekete_core::Error,
    },
}

impl CliError {
    pub fn core(context: impl Into<String>, source: fekete_core::Error) -> Self {
        Self::Core {
            context: context.into(),
            source,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "fekete", version, about = "Fekete configurations for toric line bundles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Output directory (defaults to the config's `out`, then `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Lattice points of the dilated polytopes per level.
    Lattice,
    /// Conjugates and projections of the bundle weights.
    Legendre,
    /// Equilibrium measures of the bundle weights.
    Eqmeasure,
    /// Equilibrium energies of the bundle weights.
    Energy,
    /// Coupled equilibrium energy and potentials.
    Coupled,
    /// Assignment, W1 and bottleneck distances.
    Ot,
    /// Determinant expansion with the fiber-integral and cost identities.
    Expansion,
    /// The L-functional per level.
    Lk,
    /// Maximizes the product of Vandermonde determinants per level.
    Fekete,
    /// Mutual Fekete certificate along the level schedule.
    Certify,
    /// Runs every check the config supports.
    VerifyAll,
    /// Aggregates the JSON artifacts of the output directory into
    /// `summary.json`.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Lattice => "lattice",
            Command::Legendre => "legendre",
            Command::Eqmeasure => "eqmeasure",
            Command::Energy => "energy",
            Command::Coupled => "coupled",
            Command::Ot => "ot",
            Command::Expansion => "expansion",
            Command::Lk => "lk",
            Command::Fekete => "fekete",
            Command::Certify => "certify",
            Command::VerifyAll => "verify-all",
            Command::Report => "report",
        }
    }
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn report(dir: &Path) -> Result<(), CliError> {
    let summary = report_bundle(dir)?;
    write_file(dir, SUMMARY, &to_json(&summary)?)?;
    println!("{}", dir.join(SUMMARY).display());
    Ok(())
}

/// Returns whether every verification check passed.
fn run(cli: &Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--workers: {e}")))?;
    }
    if cli.command == Command::Report {
        let cfg = match &cli.config {
            Some(p) => Some(ExperimentConfig::load(p)?),
            None => None,
        };
        report(&out_dir(cli, cfg.as_ref()))?;
        return Ok(true);
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("{} needs --config PATH", cli.command.name())))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let dir = out_dir(cli, Some(&cfg));
    let start = Instant::now();
    let outputs: Outputs = match cli.command {
        Command::Lattice => commands::lattice(&cfg)?,
        Command::Legendre => commands::legendre(&cfg)?,
        Command::Eqmeasure => commands::eqmeasure(&cfg)?,
        Command::Energy => commands::energy(&cfg)?,
        Command::Coupled => commands::coupled(&cfg)?,
        Command::Ot => commands::ot(&cfg)?,
        Command::Expansion => commands::expansion_cmd(&cfg)?,
        Command::Lk => commands::lk(&cfg)?,
        Command::Fekete => commands::fekete(&cfg)?,
        Command::Certify => commands::certify(&cfg)?,
        Command::VerifyAll => commands::verify_all(&cfg)?,
        Command::Report => unreachable!(),
    };
    let written = outputs.write(&dir)?;
    let meta = json!({
        "command": cli.command.name(),
        "config": path.display().to_string(),
        "seed": cfg.seed,
        "workers": rayon::current_num_threads(),
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_file(&dir, METADATA, &to_json(&meta)?)?;
    for a in &outputs.artifacts {
        println!("{}", a.key());
    }
    println!("{} files written to {}", written.len(), dir.display());
    for f in &outputs.failures {
        eprintln!("verification failed: {f}");
    }
    Ok(outputs.failures.is_empty())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
