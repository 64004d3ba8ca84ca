//! `scad`: key-rate sweeps, best-mask search, Monte Carlo validation and
//! dense-state oracle checks driven by scenario files.
//!
//! Exit status: 0 on success, 1 when a validation check fails, 2 on usage,
//! configuration or I/O errors.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scad::keyrate::OptimizerConfig;
use scad::scenario::ScenarioSpec;
use scad::sweep::{search_rows, sweep_rows, write_csv, write_rows};
use scad::validate::{oracle_check, run_validate, AttackFile, Report, ValidateOptions};
use scad::ScadError;

#[derive(Parser)]
#[command(name = "scad", version, about = "Selective CAD key-rate toolkit")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One CSV row per grid point and listed mask.
    Sweep(SweepArgs),
    /// One CSV row per grid point with the best of all masks.
    Search(SweepArgs),
    /// Monte Carlo and oracle checks at the scenario's validation points.
    Validate(ValidateArgs),
    /// Exact checks of an explicit attack file (p <= 3).
    Oracle(OracleArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario file.
    spec: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the optimizer's random starts.
    #[arg(long, default_value_t = OptimizerConfig::default().seed)]
    seed: u64,
}

#[derive(Args)]
struct ValidateArgs {
    spec: PathBuf,
    /// Report file; always printed to stdout as well.
    #[arg(long)]
    out: Option<PathBuf>,
    /// First simulator seed; run i uses seed + i.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Rounds per simulator run (even).
    #[arg(long, default_value_t = 2_000_000)]
    rounds: u64,
    /// Simulator runs per check.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    /// Random attacks per mask for the oracle checks.
    #[arg(long, default_value_t = 10)]
    attacks: usize,
    /// Shift every analytic value by this amount (harness self-test).
    #[arg(
        long,
        hide = true,
        default_value_t = 0.0,
        allow_negative_numbers = true
    )]
    perturb_analytic: f64,
}

#[derive(Args)]
struct OracleArgs {
    /// Attack file.
    attack: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Checks,
    Usage(String),
}

impl From<ScadError> for Failure {
    fn from(e: ScadError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn write_out(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn finish(report: &Report, out: Option<&Path>) -> Result<(), Failure> {
    let text = report.render();
    print!("{text}");
    if let Some(p) = out {
        write_out(p, &text)?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn sweep(args: &SweepArgs, search: bool) -> Result<(), Failure> {
    let spec = ScenarioSpec::load(&args.spec)?;
    let cfg = OptimizerConfig {
        seed: args.seed,
        ..OptimizerConfig::default()
    };
    let rows = if search {
        search_rows(&spec, &cfg)?
    } else {
        sweep_rows(&spec, &cfg)?
    };
    match &args.out {
        Some(p) => {
            write_csv(&rows, p)?;
            eprintln!("{}: {} rows -> {}", spec.name, rows.len(), p.display());
        }
        None => write_rows(&rows, io::stdout().lock())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Sweep(a) => sweep(a, false),
        Command::Search(a) => sweep(a, true),
        Command::Validate(a) => {
            let spec = ScenarioSpec::load(&a.spec)?;
            let opts = ValidateOptions {
                rounds: a.rounds,
                seeds: a.seeds,
                seed: a.seed,
                attacks: a.attacks,
                perturb: a.perturb_analytic,
                ..ValidateOptions::default()
            };
            finish(&run_validate(&spec, &opts)?, a.out.as_deref())
        }
        Command::Oracle(a) => {
            let file = AttackFile::load(&a.attack)?;
            let report = oracle_check(&file.attack, &file.masks, &ValidateOptions::default())?;
            finish(&report, a.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => {
            let _ = io::stdout().flush();
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
