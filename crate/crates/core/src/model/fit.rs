use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::dataset::StDataset;
use super::hyper::{Hyper, SigmaConvention};
use super::latent::{latent_posterior, LatentPosterior};
use super::optimize::{optimize_hyper, HyperFit, OptimizerOptions};
use super::posterior::LatentModel;
use super::priors::PriorSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub priors: PriorSpec,
    pub optimizer: OptimizerOptions,
    pub sigma_convention: SigmaConvention,
    pub n_samples: usize,
    pub seed: u64,
    /// Starting point; derived from the data when absent.
    pub init: Option<Hyper>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            priors: PriorSpec::default(),
            optimizer: OptimizerOptions::default(),
            sigma_convention: SigmaConvention::Innovation,
            n_samples: 250,
            seed: 1,
            init: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub hyper: HyperFit,
    pub latent: LatentPosterior,
}

impl FitResult {
    /// Log posterior of the hyperparameters at the mode.
    pub fn log_posterior(&self) -> f64 {
        self.hyper.log_posterior
    }
}

/// Start values: range a fifth of the domain span, both SDs half the sample
/// SD of the observations, `α = 0.5`.
pub fn initial_hyper(data: &StDataset, span: f64) -> Hyper {
    let y = data.y();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = var.sqrt().max(1e-3);
    Hyper {
        rho: if span > 0.0 { span / 5.0 } else { 1.0 },
        sigma_omega: sd / 2.0,
        alpha: 0.5,
        sigma_e: sd / 2.0,
    }
}

/// Hyperparameter optimization followed by latent inference at the mode.
pub fn fit(data: &StDataset, span: f64, opts: &FitOptions) -> Result<FitResult> {
    let model = LatentModel::new(data, opts.priors, opts.sigma_convention)?;
    let init = opts.init.unwrap_or_else(|| initial_hyper(data, span));
    let hyper = optimize_hyper(&model, &init, &opts.optimizer)?;
    let latent = latent_posterior(&model, &hyper.mode, opts.n_samples, opts.seed)?;
    Ok(FitResult { hyper, latent })
}
