//! `lfun`: Fourier coefficients and central L-values of cusp forms.
//!
//! Exit codes: 0 success, 1 selftest failure, 2 validation or usage error,
//! 3 computation error.

mod bench;
mod run;
mod selftest;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lfun_core::engine::{Grouping, PipelineParams, Precision};
use lfun_core::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "lfun", version, about = "Fourier coefficients and L(f, 1/2+iT) via horocycle segmentation")]
struct Cli {
    /// Worker threads for the engine (default: machine parallelism).
    /// The LFUN_THREADS environment variable takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// T-th Fourier coefficient of a holomorphic or Maass form.
    Fourier(EvalArgs),
    /// L(f, 1/2 + iT).
    Lvalue(EvalArgs),
    /// Wall time and jet-evaluation counts over a list of T, with fitted slopes.
    Bench(bench::BenchArgs),
    /// Writes a form file with exact coefficients τ(1..=n) of Δ.
    GenDelta {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Runs the built-in invariant suites.
    Selftest {
        /// Form file to check instead of the built-in Δ.
        #[arg(long)]
        form: Option<PathBuf>,
        /// Also write the report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Fast,
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    Double,
    Extended,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GroupingArg {
    Auto,
    Always,
    Singletons,
}

/// Accuracy and segmentation parameters shared by all pipelines.
#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    /// Target accuracy exponent: errors are O(T^{-gamma}).
    #[arg(long, default_value_t = 4.0)]
    gamma: f64,
    /// Quadrature step exponent (must satisfy epsilon < 1 - 3 eta).
    #[arg(long, default_value_t = 1.0 / 16.0)]
    epsilon: f64,
    /// Segment length exponent: segments have length T^eta.
    #[arg(long, default_value_t = 1.0 / 8.0)]
    eta: f64,
    /// Fixed expansion order (default: adaptive per group).
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, value_enum, default_value_t = PrecisionArg::Double)]
    precision: PrecisionArg,
    #[arg(long, value_enum, default_value_t = GroupingArg::Auto)]
    grouping: GroupingArg,
}

impl ParamArgs {
    pub fn to_params(&self, threads: Option<usize>) -> PipelineParams {
        PipelineParams {
            gamma: self.gamma,
            eps: self.epsilon,
            eta: self.eta,
            d: self.d,
            precision: match self.precision {
                PrecisionArg::Double => Precision::Double,
                PrecisionArg::Extended => Precision::Extended,
            },
            grouping: match self.grouping {
                GroupingArg::Auto => Grouping::Auto,
                GroupingArg::Always => Grouping::Always,
                GroupingArg::Singletons => Grouping::Singletons,
            },
            threads,
        }
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Form file (JSON).
    #[arg(long)]
    form: PathBuf,
    /// The index T (a positive integer for `fourier`).
    #[arg(long = "T", visible_alias = "t")]
    t: f64,
    #[arg(long, value_enum, default_value_t = Mode::Fast)]
    mode: Mode,
    #[command(flatten)]
    params: ParamArgs,
    /// Write the result record here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Compute(String),
    SelftestFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParams(_) | Error::Load(_) | Error::InsufficientCoefficients { .. } => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Compute(other.to_string()),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::SelftestFailed => 1,
            Failure::Usage(_) => 2,
            Failure::Compute(_) => 3,
        }
    }
}

pub fn io_failure(path: &std::path::Path, e: std::io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

/// `LFUN_THREADS` wins over `--threads`.
fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    match std::env::var("LFUN_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Failure::Usage(format!("LFUN_THREADS must be a positive integer, got {v:?}"))),
        _ => Ok(flag),
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let threads = resolve_threads(cli.threads)?;
    match cli.command {
        Command::Fourier(args) => run::fourier(&args, threads),
        Command::Lvalue(args) => run::lvalue(&args, threads),
        Command::Bench(args) => bench::run(&args, threads),
        Command::GenDelta { n, output } => run::gen_delta(n, output.as_deref()),
        Command::Selftest { form, report } => selftest::run(form.as_deref(), report.as_deref(), threads),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Compute(m) => eprintln!("computation failed: {m}"),
                Failure::SelftestFailed => eprintln!("selftest: failures reported above"),
            }
            ExitCode::from(f.code())
        }
    }
}
