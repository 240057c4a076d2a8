//! Config-driven command line.

mod commands;
mod config;
mod prepare;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::analysis::StandardizeAxis;
use crate::baselines::Kernel;
use crate::diagnostics::WeightScheme;
use crate::error::{Error, Result};
use crate::model::SigmaConvention;

pub use commands::{run_cluster, run_compare, run_diagnose, run_fit, run_ingest, run_regions, run_simulate};
pub use config::{DiagnoseOptions, GwrOptions, Holdout, InputFiles, MoranSummary, PipelineConfig};
pub use prepare::{prepare, Prepared};

#[derive(Parser, Debug)]
#[command(name = "stmap", version, about = "Spatio-temporal disease mapping pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Load and validate inputs; write log rates and the model design.
    Ingest(Common),
    /// Moran's I, Ljung-Box and covariate screening.
    Diagnose(Common),
    /// Fit the space-time model; write fit.json, rates.csv and mesh.json.
    Fit(Common),
    /// RMSE/MAE of the model against OLS and GWR.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Fit now instead of reading an existing rates.csv.
        #[arg(long)]
        fit: bool,
    },
    /// Three-level clustering of posterior rates per interval.
    Cluster(Common),
    /// Population-weighted regional rate series.
    Regions(Common),
    /// Write a synthetic input bundle with a matching config.
    Simulate(Common),
}

#[derive(Args, Debug)]
pub struct Common {
    /// JSON pipeline config; relative paths inside it start at its directory.
    pub config: PathBuf,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// innovation or marginal.
    #[arg(long)]
    pub sigma_convention: Option<String>,
    /// knn:K, rook or queen.
    #[arg(long)]
    pub weights: Option<String>,
    /// per-week or per-area.
    #[arg(long)]
    pub axis: Option<String>,
    /// gaussian or bisquare.
    #[arg(long)]
    pub kernel: Option<String>,
}

fn parse_convention(s: &str) -> Result<SigmaConvention> {
    match s {
        "innovation" => Ok(SigmaConvention::Innovation),
        "marginal" => Ok(SigmaConvention::Marginal),
        other => Err(Error::Parameter(format!("unknown sigma convention '{other}'"))),
    }
}

fn parse_weights(s: &str) -> Result<WeightScheme> {
    match s {
        "rook" => Ok(WeightScheme::Rook),
        "queen" => Ok(WeightScheme::Queen),
        _ => {
            let k = s
                .strip_prefix("knn:")
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| Error::Parameter(format!("unknown weights scheme '{s}'")))?;
            Ok(WeightScheme::Knn { k })
        }
    }
}

impl Common {
    /// Loads the config and applies command-line overrides.
    pub fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
            cfg.simulate.seed = s;
        }
        if let Some(s) = &self.sigma_convention {
            cfg.sigma_convention = parse_convention(s)?;
            cfg.simulate.sigma_convention = cfg.sigma_convention;
        }
        if let Some(s) = &self.weights {
            cfg.diagnose.weights = parse_weights(s)?;
        }
        if let Some(s) = &self.axis {
            cfg.cluster.axis = s.parse::<StandardizeAxis>()?;
        }
        if let Some(s) = &self.kernel {
            cfg.gwr.kernel = s.parse::<Kernel>()?;
        }
        Ok(cfg)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest(c) => run_ingest(&c.load()?),
        Command::Diagnose(c) => run_diagnose(&c.load()?),
        Command::Fit(c) => run_fit(&c.load()?),
        Command::Compare { common, fit } => run_compare(&common.load()?, *fit),
        Command::Cluster(c) => run_cluster(&c.load()?),
        Command::Regions(c) => run_regions(&c.load()?),
        Command::Simulate(c) => run_simulate(&c.load()?),
    }
}

/// Process exit status for an error: 2 for unreadable inputs, 3 for
/// numerical failure of the model, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => 2,
        Error::Numerical(_) | Error::NotPositiveDefinite { .. } => 3,
        _ => 1,
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("STMAP_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Parameter(format!("STMAP_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))
}

/// Parses arguments, runs the command and returns the exit status.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match init_threads().and_then(|_| run(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                Error::Io { path, source } => eprintln!("error: missing or unreadable input {}: {source}", path.display()),
                _ => eprintln!("error: {e}"),
            }
            exit_code(&e)
        }
    }
}
