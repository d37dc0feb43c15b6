//! `singlecopy`: seeded experiments and verification suites for single-copy
//! product testing.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "singlecopy", version = env!("SINGLECOPY_VERSION"), about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every bound-verification suite on randomized instances.
    Verify(VerifyArgs),
    /// Paired completeness/soundness trials of the product tester.
    MpTest(MpTestArgs),
    /// TV distance between two ensembles under a random-basis strategy.
    Distinguish(DistinguishArgs),
    /// Fraction of Haar states within eps of a bipartite product state.
    FarFraction(FarFractionArgs),
    /// Single-copy purity estimation on a built-in source.
    Purity(PurityArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Leave wall-clock times out so repeated runs are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, hide = true)]
    pub inject_corrupt_gram: bool,
}

#[derive(Args, Debug)]
pub struct MpTestArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 0.6)]
    pub eps: f64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Dump the measurement record of the first trial of each ensemble as CSV.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EnsembleArg {
    GlobalHaar,
    MaximallyMixed,
    ProductHaar,
    BipartiteHaar,
    Far,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Global,
    Local,
}

#[derive(Args, Debug)]
pub struct DistinguishArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    /// Number of measured copies.
    #[arg(long = "T", short = 'T', default_value_t = 2)]
    pub t: usize,
    /// Ensemble draws for sampled mixtures, or runs per ensemble for histograms.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = EnsembleArg::GlobalHaar)]
    pub a: EnsembleArg,
    #[arg(long, value_enum, default_value_t = EnsembleArg::MaximallyMixed)]
    pub b: EnsembleArg,
    /// Distance parameter of the far ensemble.
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = ScopeArg::Global)]
    pub scope: ScopeArg,
}

#[derive(Args, Debug)]
pub struct FarFractionArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 6)]
    pub d: usize,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    MaximallyMixed,
    Pure,
    /// Equal mixture of a Haar pure state and the maximally mixed state.
    HalfMixed,
}

#[derive(Args, Debug)]
pub struct PurityArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dimension of the measured system.
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = SourceArg::MaximallyMixed)]
    pub source: SourceArg,
}

/// How a command ended, mapped onto the exit-code contract.
pub enum Failure {
    /// A bound or acceptance threshold was not met; the report was written.
    Check,
    Usage(String),
    Runtime(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match &cli.command {
        Command::Verify(a) => a.common.threads,
        Command::MpTest(a) => a.common.threads,
        Command::Distinguish(a) => a.common.threads,
        Command::FarFraction(a) => a.common.threads,
        Command::Purity(a) => a.common.threads,
    };
    if let Some(t) = threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Verify(a) => commands::verify(a),
        Command::MpTest(a) => commands::mp_test(a),
        Command::Distinguish(a) => commands::distinguish(a),
        Command::FarFraction(a) => commands::far_fraction(a),
        Command::Purity(a) => commands::purity(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
