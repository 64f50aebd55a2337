//! `econformal`: calibrate once, predict many times.
//!
//! Exit codes: 0 success, 1 usage, 2 data validation, 3 I/O.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "econformal",
    version,
    about = "E-value conformal prediction sets from a reusable, Hoeffding-corrected calibration summary",
    after_help = "FILE FORMATS\n  \
        probset-csv v1   header `p0,...,p{K-1},label`, optional `# classes: a,b,...` line, one record per line\n  \
        summary          `key = value` lines: format_version, n, empirical_mean, t, a, b, reuse_confidence\n  \
        predictions      `index,threshold,set_size,labels` with labels joined by `;`\n  \
        reports          text table followed by `#kv key=value` lines\n\n\
        EXIT CODES\n  0 success, 1 usage error, 2 data validation error, 3 I/O error"
)]
struct Cli {
    /// Worker threads for evaluate and simulate (default: all cores). Results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Randomly split a probset-csv file into calibration and test files.
    Split(SplitArgs),
    /// Compute a reusable calibration summary from a calibration file.
    Calibrate(CalibrateArgs),
    /// Write one prediction set per record of a probset-csv file.
    Predict(PredictArgs),
    /// Coverage and set-size distribution over a labeled test file.
    Evaluate(EvaluateArgs),
    /// Hoeffding correction and reuse confidence arithmetic.
    Hoeffding(HoeffdingArgs),
    /// Monte Carlo check of the reuse and coverage guarantees.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// probset-csv input.
    #[arg(long)]
    input: std::path::PathBuf,
    /// Fraction of records assigned to calibration, in (0, 1).
    #[arg(long, value_parser = parse_open_unit)]
    fraction: f64,
    /// Seed for the ChaCha8 shuffle.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_calib: std::path::PathBuf,
    #[arg(long)]
    out_test: std::path::PathBuf,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("correction").required(true).args(["t", "confidence"])))]
struct CalibrateArgs {
    /// probset-csv calibration file; true-label scores 1 - p are calibrated.
    #[arg(long)]
    calib: std::path::PathBuf,
    /// Hoeffding correction t.
    #[arg(long, value_parser = parse_non_negative)]
    t: Option<f64>,
    /// Reuse confidence in (0, 1); t is derived from it.
    #[arg(long, value_parser = parse_open_unit)]
    confidence: Option<f64>,
    #[arg(long)]
    out_summary: std::path::PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// probset-csv file (the label column is ignored).
    #[arg(long)]
    input: std::path::PathBuf,
    /// Calibration summary written by `calibrate`.
    #[arg(long)]
    summary: std::path::PathBuf,
    /// Markov level alpha-tilde in (0, 1).
    #[arg(long, value_parser = parse_open_unit)]
    alpha_tilde: f64,
    /// Output path (default: stdout).
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Labeled probset-csv test file.
    #[arg(long)]
    input: std::path::PathBuf,
    #[arg(long)]
    summary: std::path::PathBuf,
    #[arg(long, value_parser = parse_open_unit)]
    alpha_tilde: f64,
    /// Output path (default: stdout).
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("correction").required(true).args(["t", "confidence"])))]
struct HoeffdingArgs {
    /// Calibration size.
    #[arg(long, value_parser = parse_positive_count)]
    n: usize,
    #[arg(long, value_parser = parse_non_negative)]
    t: Option<f64>,
    #[arg(long, value_parser = parse_open_unit)]
    confidence: Option<f64>,
    /// Score range b - a.
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    range: f64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_positive_count)]
    n: usize,
    #[arg(long, value_parser = parse_non_negative)]
    t: f64,
    #[arg(long, value_parser = parse_open_unit)]
    alpha_tilde: f64,
    #[arg(long, value_parser = parse_positive_count)]
    trials: usize,
    /// uniform01 | beta(a,b) | two-point(p,v1,v2)
    #[arg(long)]
    dist: String,
    #[arg(long)]
    seed: u64,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("`{s}` is not a finite number"))
}

fn parse_open_unit(s: &str) -> Result<f64, String> {
    parse_f64(s).and_then(|x| {
        if x > 0.0 && x < 1.0 {
            Ok(x)
        } else {
            Err(format!("{x} is not in (0, 1)"))
        }
    })
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    parse_f64(s).and_then(|x| {
        if x >= 0.0 {
            Ok(x)
        } else {
            Err(format!("{x} is negative"))
        }
    })
}

fn parse_positive(s: &str) -> Result<f64, String> {
    parse_f64(s).and_then(|x| {
        if x > 0.0 {
            Ok(x)
        } else {
            Err(format!("{x} is not positive"))
        }
    })
}

fn parse_positive_count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("`{s}` is not a positive integer")),
        Ok(n) => Ok(n),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {threads} threads: {e}")))?;
    }
    match cli.command {
        Command::Split(a) => {
            commands::split(&a.input, a.fraction, a.seed, &a.out_calib, &a.out_test)
        }
        Command::Calibrate(a) => commands::calibrate(&a.calib, a.t, a.confidence, &a.out_summary),
        Command::Predict(a) => {
            commands::predict(&a.input, &a.summary, a.alpha_tilde, a.out.as_deref())
        }
        Command::Evaluate(a) => {
            commands::evaluate(&a.input, &a.summary, a.alpha_tilde, a.out.as_deref())
        }
        Command::Hoeffding(a) => commands::hoeffding(a.n, a.t, a.confidence, a.range),
        Command::Simulate(a) => {
            commands::simulate(a.n, a.t, a.alpha_tilde, a.trials, &a.dist, a.seed)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
