//! The hierarchical space-time model: priors, hyperparameter posterior,
//! optimization and exact conditional latent inference.

mod ar1;
mod dataset;
mod fit;
mod hyper;
mod kron;
mod latent;
mod optimize;
mod posterior;
mod priors;
mod risk;

pub use ar1::{ar1_log_det, ar1_precision, st_precision};
pub use dataset::{assemble_dataset, Observation, StDataset};
pub use hyper::{Hyper, SigmaConvention, HYPER_NAMES};
pub use posterior::{log_hyper_posterior, Conditional, LatentModel};
pub use priors::{
    ar1_upper_tail, calibrate_pc_lambdas, log_ar1_prior, log_noise_prior, log_range_prior,
    log_sigma_prior, PcLambdas, PriorSpec, TailStatement,
};
pub use fit::{fit, initial_hyper, FitOptions, FitResult};
pub use latent::{latent_posterior, CellPrediction, CoefSummary, LatentPosterior, INTERCEPT};
pub use optimize::{optimize_hyper, HyperFit, HyperRow, OptimizerOptions};
pub use risk::{relative_risk, relative_risks, RelativeRisk};
