//! `bsde-lab`: runs experiment configs and checks their reports.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bsde_core::harness::{run_experiment, verify_report, ExperimentConfig, RunOptions, Stage};
use bsde_core::Error;
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "bsde-lab", version, about = "Euler scheme experiments for BSDEs with random terminal time")]
struct Cli {
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "BSDE_LAB_WORKERS")]
    workers: Option<usize>,
    /// Output root; runs go to `<out>/<name>/<timestamp>/`.
    #[arg(long, global = true, env = "BSDE_LAB_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse the config and check the stepsize and budget conditions.
    Validate { config: PathBuf },
    /// Simulate paths and exit times for every stepsize.
    Simulate { config: PathBuf },
    /// Simulate and run the backward solvers.
    Solve { config: PathBuf },
    /// Simulate, solve and fit convergence rates.
    Rates { config: PathBuf },
    /// Exit-time moment scans and the Freidlin check.
    Moments { config: PathBuf },
    /// Gronwall, Kolmogorov, strong Euler and two-stopping checks.
    Checks { config: PathBuf },
    /// Verify the hashes of a finished run directory.
    Report { dir: PathBuf },
}

const VALIDATION: u8 = 1;
const RUNTIME: u8 = 2;
const WINDOW: u8 = 3;

fn is_validation(e: &Error) -> bool {
    match e {
        Error::Stage { stage, source } => stage == "validate" || is_validation(source),
        Error::Config(_) => true,
        _ => false,
    }
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, (u8, anyhow::Error)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| (VALIDATION, e))?;
    ExperimentConfig::from_toml_str(&text).map_err(|e| (VALIDATION, anyhow::Error::new(e).context(format!("parsing {}", path.display()))))
}

fn run(cli: Cli) -> Result<u8, (u8, anyhow::Error)> {
    let stage = match &cli.command {
        Command::Validate { config } => {
            let cfg = load(config)?;
            let s = cfg.validate().map_err(|e| (VALIDATION, e.into()))?;
            println!("{}: problem {}", cfg.name, s.problem);
            for v in &s.stepsizes {
                println!("  h = {} ok (bound {})", v.h, v.bound);
            }
            if let Some(b) = s.budget {
                println!("  moment budget threshold {} feasible {}", b.threshold(), b.feasible);
            }
            return Ok(0);
        }
        Command::Report { dir } => {
            let r = verify_report(dir).map_err(|e| (VALIDATION, e.into()))?;
            println!("{} ({}) seed {}: {} files", r.manifest.experiment, r.manifest.command, r.manifest.seed, r.manifest.files.len());
            for f in &r.mismatched {
                println!("  hash mismatch: {f}");
            }
            for f in &r.missing {
                println!("  missing: {f}");
            }
            if let Some(s) = &r.manifest.failed_stage {
                println!("  run failed at stage {s}");
            }
            return Ok(if r.ok() { 0 } else { VALIDATION });
        }
        Command::Simulate { .. } => Stage::Simulate,
        Command::Solve { .. } => Stage::Solve,
        Command::Rates { .. } => Stage::Rates,
        Command::Moments { .. } => Stage::Moments,
        Command::Checks { .. } => Stage::Checks,
    };
    let path = match &cli.command {
        Command::Simulate { config }
        | Command::Solve { config }
        | Command::Rates { config }
        | Command::Moments { config }
        | Command::Checks { config } => config,
        _ => unreachable!(),
    };
    let cfg = load(path)?;
    let opts = RunOptions { out_root: cli.out.clone(), seed: cli.seed, stamp: None };
    let outcome = run_experiment(&cfg, stage, &opts).map_err(|e| {
        let code = if is_validation(&e) { VALIDATION } else { RUNTIME };
        (code, e.into())
    })?;
    println!("{}", outcome.dir.display());
    for w in &outcome.checks.windows {
        println!("  [{}] {} = {} in [{}, {}]", if w.pass { "pass" } else { "FAIL" }, w.name, w.value, w.lo, w.hi);
    }
    for n in &outcome.checks.notes {
        println!("  note: {n}");
    }
    Ok(if outcome.windows_pass() { 0 } else { WINDOW })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: cannot start {n} worker threads");
            return ExitCode::from(VALIDATION);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err((code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
