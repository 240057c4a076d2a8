use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::hyper::Hyper;
use super::posterior::LatentModel;

const Z975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub lo95: f64,
    pub hi95: f64,
    /// The 95% interval excludes zero.
    pub significant: bool,
}

/// Prediction for one `(area, week)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPrediction {
    pub area: usize,
    pub week: usize,
    pub theta_hat: f64,
    pub sd: f64,
    pub rate: f64,
    pub rate_lo95: f64,
    pub rate_hi95: f64,
    /// No observation for the cell.
    pub censored: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatentPosterior {
    pub hyper: Hyper,
    pub coefficients: Vec<CoefSummary>,
    /// Posterior mean of `ξ`, week-major (`(t-1)·m + node`).
    pub field_mean: Vec<f64>,
    pub field_sd: Vec<f64>,
    /// All `n_areas × T` cells, area-major within week.
    pub predictions: Vec<CellPrediction>,
    pub n_samples: usize,
}

impl LatentPosterior {
    pub fn prediction(&self, area: usize, week: usize) -> Option<&CellPrediction> {
        self.predictions.iter().find(|p| p.area == area && p.week == week)
    }
}

pub const INTERCEPT: &str = "intercept";

/// Exact Gaussian posterior of `(β, ξ)` at fixed hyperparameters. Means are
/// exact; SDs come from `n_samples` draws `mean + Pᵀ L⁻ᵀ z` about the exact
/// mean, and intervals are `mean ± 1.96·sd`.
pub fn latent_posterior(
    model: &LatentModel<'_>,
    hyper: &Hyper,
    n_samples: usize,
    seed: u64,
) -> Result<LatentPosterior> {
    if n_samples < 2 {
        return Err(Error::Parameter("at least two posterior samples are needed".into()));
    }
    let data = model.data();
    let cond = model.conditional(hyper)?;
    let dim = data.latent_dim();
    let p1 = data.n_coef();
    let rows = data.projector_rows();
    let cells: Vec<(usize, usize)> = (1..=data.weeks)
        .flat_map(|w| (0..data.n_areas()).map(move |a| (a, w)))
        .collect();
    let cell_rows: Vec<Vec<(usize, f64)>> =
        cells.iter().map(|&(a, w)| data.cell_row(&rows, a, w)).collect();
    let dot = |row: &[(usize, f64)], u: &[f64]| row.iter().map(|&(j, v)| v * u[j]).sum::<f64>();
    let cell_mean: Vec<f64> = cell_rows.iter().map(|r| dot(r, &cond.mean)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normals: Vec<Vec<f64>> = (0..n_samples)
        .map(|_| (0..cond.normals_needed()).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let deviations: Vec<(Vec<f64>, Vec<f64>)> = normals
        .par_iter()
        .map(|z| {
            let dev = cond.sample_deviation(z);
            let cdev = cell_rows.iter().map(|r| dot(r, &dev)).collect();
            (dev, cdev)
        })
        .collect();
    let mut ss = vec![0.0; dim];
    let mut css = vec![0.0; cells.len()];
    for (dev, cdev) in &deviations {
        for (s, d) in ss.iter_mut().zip(dev) {
            *s += d * d;
        }
        for (s, d) in css.iter_mut().zip(cdev) {
            *s += d * d;
        }
    }
    let n = n_samples as f64;
    let sd: Vec<f64> = ss.iter().map(|s| (s / n).sqrt()).collect();

    let names = std::iter::once(INTERCEPT.to_string()).chain(data.covariate_names.iter().cloned());
    let coefficients = names
        .enumerate()
        .map(|(j, name)| {
            let (mean, s) = (cond.mean[j], sd[j]);
            let (lo95, hi95) = (mean - Z975 * s, mean + Z975 * s);
            CoefSummary {
                name,
                mean,
                sd: s,
                lo95,
                hi95,
                significant: lo95 > 0.0 || hi95 < 0.0,
            }
        })
        .collect();

    let observed: std::collections::HashSet<(usize, usize)> =
        data.observations.iter().map(|o| (o.area, o.week)).collect();
    let predictions = cells
        .iter()
        .zip(cell_mean.iter().zip(&css))
        .map(|(&(area, week), (&theta_hat, &s2))| {
            let s = (s2 / n).sqrt();
            CellPrediction {
                area,
                week,
                theta_hat,
                sd: s,
                rate: theta_hat.exp(),
                rate_lo95: (theta_hat - Z975 * s).exp(),
                rate_hi95: (theta_hat + Z975 * s).exp(),
                censored: !observed.contains(&(area, week)),
            }
        })
        .collect();

    Ok(LatentPosterior {
        hyper: *hyper,
        coefficients,
        field_mean: cond.mean[p1..].to_vec(),
        field_sd: sd[p1..].to_vec(),
        predictions,
        n_samples,
    })
}
