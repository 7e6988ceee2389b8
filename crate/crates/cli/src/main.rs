//! `compfact` command-line driver.

mod bench;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "compfact",
    version,
    about = "Compressed matrix and tensor factorization with sparse recovery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep k and d on planted instances and write results.csv.
    SynthBench(bench::BenchArgs),
    /// Same sweep for planted tensors (task = tensor).
    TensorBench(bench::BenchArgs),
    /// Draw a sparse binary projection and write it as JSON.
    GenProjection(GenProjectionArgs),
    /// Draw a planted matrix instance into a directory.
    Synth(SynthArgs),
    /// Recover a sparse vector from its measurements.
    Recover(RecoverArgs),
    /// Certify the expansion property of a projection.
    ExpanderCheck(ExpanderArgs),
    /// Factorize a matrix with NMF or sparse PCA.
    Factorize(FactorizeArgs),
    /// Run factorize-recover (fr) or recover-factorize (rf).
    Pipeline(PipelineArgs),
    /// Empirical uniqueness and expansion checks on an instance.
    Uniqueness(UniquenessArgs),
}

#[derive(Args, Debug)]
pub struct GenProjectionArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub r: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long)]
    pub nonneg: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecoveryKind {
    L1,
    Greedy,
}

#[derive(Args, Debug, Clone)]
pub struct RecoveryFlags {
    #[arg(long, value_enum, default_value_t = RecoveryKind::L1)]
    pub recovery: RecoveryKind,
    /// Sparsity hint for greedy recovery.
    #[arg(long)]
    pub sparsity: Option<usize>,
    #[arg(long)]
    pub nonneg: bool,
    /// Enforce non-negativity inside the solver instead of clamping.
    #[arg(long)]
    pub hard_nonneg: bool,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Args, Debug)]
pub struct RecoverArgs {
    /// Projection JSON.
    #[arg(long)]
    pub projection: PathBuf,
    /// Measurement vector CSV.
    #[arg(long)]
    pub y: PathBuf,
    #[command(flatten)]
    pub flags: RecoveryFlags,
    /// Recovered vector CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional recovery report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExpanderArgs {
    #[arg(long)]
    pub projection: PathBuf,
    /// Largest subset size; defaults to max(1, floor(d / (p e^5))).
    #[arg(long)]
    pub gamma_n: Option<usize>,
    #[arg(long, default_value_t = 0.8)]
    pub alpha: f64,
    /// Enumerate every subset instead of sampling.
    #[arg(long)]
    pub exhaustive: bool,
    #[arg(long, default_value_t = compfact::sensing::DEFAULT_SAMPLED_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = compfact::sensing::DEFAULT_SUBSET_BUDGET)]
    pub budget: u128,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report JSON; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodKind {
    Nmf,
    Spca,
}

#[derive(Args, Debug, Clone)]
pub struct MethodFlags {
    #[arg(long, value_enum, default_value_t = MethodKind::Nmf)]
    pub method: MethodKind,
    /// Sparse PCA l1 weight.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long)]
    pub r: usize,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct FactorizeArgs {
    /// Matrix CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub method: MethodFlags,
    /// Output directory for W.csv, H.csv, report.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PipelineMode {
    Fr,
    Rf,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    #[arg(value_enum)]
    pub mode: PipelineMode,
    #[arg(long)]
    pub projection: PathBuf,
    /// Compressed data CSV (d rows), or ambient data with --ambient.
    #[arg(long)]
    pub input: PathBuf,
    /// Project the input with the projection before running.
    #[arg(long)]
    pub ambient: bool,
    #[command(flatten)]
    pub method: MethodFlags,
    #[command(flatten)]
    pub recovery: RecoveryFlags,
    /// Output directory for W_hat.csv, H_hat.csv, pipeline.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct UniquenessArgs {
    /// Instance directory written by `synth`.
    #[arg(long)]
    pub instance: PathBuf,
    /// Projection JSON; otherwise drawn from --d, --p, --seed.
    #[arg(long)]
    pub projection: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = compfact::metrics::NNZ_EPS_REL)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub rank_tol: f64,
    /// Enumerate all factor subsets when there are at most this many.
    #[arg(long, default_value_t = 1 << 16)]
    pub exhaustive_limit: u64,
    /// Report JSON; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SynthBench(a) => bench::run(a, None),
        Command::TensorBench(a) => bench::run(a, Some(bench::Task::Tensor)),
        Command::GenProjection(a) => commands::gen_projection(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Recover(a) => commands::recover(&a),
        Command::ExpanderCheck(a) => commands::expander_check(&a),
        Command::Factorize(a) => commands::factorize(&a),
        Command::Pipeline(a) => commands::pipeline(&a),
        Command::Uniqueness(a) => commands::uniqueness(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
