//! Command-line front end: reads tab-separated hypothesis tables, runs the
//! rescoring pipeline or a bare filter, generates synthetic data sets, and
//! estimates error rates by Monte Carlo.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

mod commands;
mod schema;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Errors mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "reset",
    about = "Competition-based multiple testing with semi-supervised rescoring",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rescore a hypothesis table and report discoveries with FDR/FDP control.
    Reset(ResetArgs),
    /// Run a bare discovery filter without rescoring.
    Filter(FilterArgs),
    /// Generate a synthetic data set.
    Simulate(SimulateArgs),
    /// Estimate FDR/power of a method over repeated simulated runs.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Fdr,
    Fdp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Seqstep,
    #[value(name = "seqstep+")]
    SeqstepPlus,
    Fdpsd,
    Grsd,
    Bh,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimArg {
    Geometric,
    Betamix,
    Competition,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    CircleCenter,
    CircleCorner,
    Ellipse,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SideInfoArg {
    None,
    Uninformative,
    ClassConditional,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ValidateMethodArg {
    Reset,
    Bh,
    #[value(name = "seqstep+")]
    SeqstepPlus,
}

#[derive(Args)]
struct ResetArgs {
    /// Input TSV: either a `pvalue` column or `label` + `score` columns,
    /// optional `x_*` side info and `id`.
    #[arg(long)]
    input: String,
    /// Target FDR level (FDR mode) or FDP threshold (FDP mode).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum, default_value = "fdr")]
    mode: ModeArg,
    /// Confidence parameter for FDP mode.
    #[arg(long)]
    gamma: Option<f64>,
    /// Probability that each decoy joins the training split.
    #[arg(long, default_value_t = 0.5)]
    s: f64,
    /// Target region bound for p-value conversion: p < a becomes a target.
    #[arg(long, default_value_t = 0.5)]
    a: f64,
    /// Decoy region (b1, b2] for p-value conversion.
    #[arg(long, default_value_t = 0.5)]
    b1: f64,
    #[arg(long, default_value_t = 1.0)]
    b2: f64,
    /// Override the null target probability c0 (defaults to the value
    /// implied by the conversion regions, or 0.5 in competition mode).
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Size of the parallel task pool (0 = one worker per CPU).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Use the deterministic FDP bound instead of the coinflip variant.
    #[arg(long, default_value_t = false)]
    deterministic_fdpsd: bool,
    /// Output directory for discoveries.tsv and run.json.
    #[arg(long, default_value = ".")]
    out: String,
    /// Re-run a previous configuration: read every parameter from this
    /// run.json instead of the command line.
    #[arg(long, conflicts_with_all = [
        "alpha", "mode", "gamma", "s", "a", "b1", "b2", "c0", "seed",
        "threads", "deterministic_fdpsd",
    ])]
    config: Option<String>,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    input: String,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    alpha: f64,
    /// Confidence parameter (fdpsd and grsd only).
    #[arg(long)]
    gamma: Option<f64>,
    /// Null target probability for the label-based filters (defaults to the
    /// value implied by the conversion regions, or 0.5 in competition mode).
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    a: f64,
    #[arg(long, default_value_t = 0.5)]
    b1: f64,
    #[arg(long, default_value_t = 1.0)]
    b2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = false)]
    deterministic_fdpsd: bool,
    #[arg(long, default_value = ".")]
    out: String,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    sim: SimArg,
    /// Region shape (geometric only).
    #[arg(long, value_enum)]
    scenario: Option<ScenarioArg>,
    /// Number of hypotheses (competition only; geometric and betamix are
    /// fixed-size).
    #[arg(long, default_value_t = 500)]
    m: usize,
    /// Fraction of false nulls (competition only).
    #[arg(long, default_value_t = 0.0)]
    false_fraction: f64,
    /// Mean shift of false-null scores (competition only).
    #[arg(long, default_value_t = 3.0)]
    shift: f64,
    /// Decoy draws per hypothesis (competition only).
    #[arg(long, default_value_t = 1)]
    decoys: usize,
    /// Side-information model (competition only).
    #[arg(long, value_enum, default_value = "uninformative")]
    side_info: SideInfoArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: String,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, value_enum)]
    sim: SimArg,
    #[arg(long, value_enum)]
    scenario: Option<ScenarioArg>,
    #[arg(long, default_value_t = 500)]
    m: usize,
    #[arg(long, default_value_t = 0.0)]
    false_fraction: f64,
    #[arg(long, default_value_t = 3.0)]
    shift: f64,
    #[arg(long, default_value_t = 1)]
    decoys: usize,
    #[arg(long, value_enum, default_value = "uninformative")]
    side_info: SideInfoArg,
    #[arg(long, value_enum, default_value = "reset")]
    method: ValidateMethodArg,
    /// Comma-separated evaluation levels, e.g. "0.05,0.1,0.2".
    #[arg(long, default_value = "0.1")]
    alpha: String,
    #[arg(long, value_enum, default_value = "fdr")]
    mode: ModeArg,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    s: f64,
    #[arg(long, default_value_t = 0.5)]
    a: f64,
    #[arg(long, default_value_t = 0.5)]
    b1: f64,
    #[arg(long, default_value_t = 1.0)]
    b2: f64,
    #[arg(long)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = ".")]
    out: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not failures.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Reset(args) => commands::cmd_reset(args),
        Command::Filter(args) => commands::cmd_filter(args),
        Command::Simulate(args) => commands::cmd_simulate(args),
        Command::Validate(args) => commands::cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
