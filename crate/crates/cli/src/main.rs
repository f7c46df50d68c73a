//! `spoga`: batch front end for the photonic GEMM simulator.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration or usage error,
//! 3 verification failure, 4 I/O error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{AdcKind, Source};

#[derive(Debug, Parser)]
#[command(name = "spoga", version, about = "Simulate, verify and compare analog photonic INT8 GEMM accelerators")]
pub struct Cli {
    /// TOML config file; command-line flags take precedence over it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for data-parallel work (default: one per core)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run everything on the calling thread
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the functional datapaths against exact integer arithmetic
    Verify(VerifyArgs),
    /// Run one model on one or more architectures and write per-layer CSVs
    Simulate(SimulateArgs),
    /// Emit the bundled (N, M) table and/or link-budget estimates
    Scalability(ScalabilityArgs),
    /// Compare architectures over several models with geometric-mean ratios
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Random vector pairs per dot-product suite [default: 10000]
    #[arg(long)]
    pub trials: Option<u64>,
    /// Random GEMM jobs run through the plan executor [default: 100]
    #[arg(long)]
    pub gemm_jobs: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also check every length-1 operand pair (511 x 511 cases)
    #[arg(long)]
    pub exhaustive: bool,
    /// Miswire the middle BPCA selector; the run must then fail
    #[arg(long)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Cores per accelerator [default: 8]
    #[arg(long)]
    pub cores: Option<usize>,
    /// Partial cost table (TOML) merged over the bundled one
    #[arg(long, value_name = "FILE")]
    pub costs: Option<PathBuf>,
    /// Output directory [default: $SPOGA_OUT_DIR or ./spoga-out]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Scale laser energy by slot occupancy instead of charging full power
    #[arg(long)]
    pub occupancy_gating: bool,
    /// Linear instead of logarithmic FPS axis in charts
    #[arg(long)]
    pub linear_fps: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Bundled model name or manifest path
    #[arg(long)]
    pub model: Option<String>,
    /// Architecture selector, e.g. SPOGA_10, HOLYLIGHT_5, SPOGA_1@5dBm, or a bare
    /// name combined with --data-rate/--laser-power (repeatable)
    #[arg(long = "arch")]
    pub archs: Vec<String>,
    /// Data rate in GS/s for bare architecture names
    #[arg(long)]
    pub data_rate: Option<u32>,
    /// SPOGA laser power in dBm for bare architecture names
    #[arg(long)]
    pub laser_power: Option<f64>,
    /// Execute every GEMM on seeded synthetic operands instead of counting
    #[arg(long)]
    pub functional: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// ADC model for functional runs
    #[arg(long, value_enum)]
    pub adc: Option<AdcKind>,
    /// Resolution of the quantized ADC [default: 16]
    #[arg(long)]
    pub adc_bits: Option<u32>,
    #[command(flatten)]
    pub common: CostArgs,
}

#[derive(Debug, Args)]
pub struct ScalabilityArgs {
    /// Which rows to emit [default: paper]
    #[arg(long, value_enum)]
    pub source: Option<Source>,
    /// Estimator data rates in GS/s, comma separated; empty for none
    #[arg(long, num_args = 0.., value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    /// Estimator laser powers in dBm, comma separated; empty for none
    #[arg(long, num_args = 0.., value_delimiter = ',')]
    pub powers: Option<Vec<f64>>,
    /// Output directory [default: $SPOGA_OUT_DIR or ./spoga-out]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Bundled model name or manifest path (repeatable) [default: all bundled]
    #[arg(long = "model")]
    pub models: Vec<String>,
    /// Architecture selector (repeatable) [default: SPOGA_10 DEAPCNN_10 HOLYLIGHT_10]
    #[arg(long = "arch")]
    pub archs: Vec<String>,
    /// Architecture the ratios are taken against [default: first --arch]
    #[arg(long)]
    pub reference: Option<String>,
    /// Size every other accelerator to the reference accelerator's area
    #[arg(long)]
    pub iso_area: bool,
    #[command(flatten)]
    pub common: CostArgs,
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Verification(String),
    Io(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Config(_) => 2,
            Failure::Verification(_) => 3,
            Failure::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
            Failure::Io(m) => write!(f, "I/O error: {m}"),
            Failure::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<spoga::Error> for Failure {
    fn from(e: spoga::Error) -> Self {
        match e {
            spoga::Error::Config(m) => Failure::Config(m),
            spoga::Error::Io { path, message } => Failure::Io(format!("{path}: {message}")),
            spoga::Error::PlanStale(_) => Failure::Other(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("spoga: {f}");
            ExitCode::from(f.code())
        }
    }
}
