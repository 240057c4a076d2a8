//! Comparison models: global OLS and week-by-week geographically weighted
//! regression.

mod gwr;
mod ols;

pub use gwr::{gwr_bandwidth_cv, gwr_cv_score, gwr_fit, gwr_predict, GwrFit, Kernel};
pub use ols::{least_squares, ols_fit, OlsFit};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Observation;

/// OLS pooled over all observed area-weeks. Returns fitted values in
/// observation order.
pub fn ols_pooled(design: &[Vec<f64>], observations: &[Observation]) -> Result<OlsFit> {
    let x: Vec<Vec<f64>> = observations.iter().map(|o| design[o.area].clone()).collect();
    let y: Vec<f64> = observations.iter().map(|o| o.theta).collect();
    ols_fit(&x, &y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyGwr {
    /// Bandwidth used in each week (`None` for weeks without data).
    pub bandwidths: Vec<Option<f64>>,
    /// Fitted values in observation order.
    pub fitted: Vec<f64>,
}

/// GWR fitted separately for each week on that week's observed areas.
/// With `bandwidth = None` each week picks its own from `grid` by
/// leave-one-out cross-validation.
pub fn gwr_by_week(
    locations: &[[f64; 2]],
    design: &[Vec<f64>],
    observations: &[Observation],
    weeks: usize,
    bandwidth: Option<f64>,
    grid: &[f64],
    kernel: Kernel,
) -> Result<WeeklyGwr> {
    let mut fitted = vec![f64::NAN; observations.len()];
    let mut bandwidths = vec![None; weeks];
    for week in 1..=weeks {
        let idx: Vec<usize> = (0..observations.len()).filter(|&i| observations[i].week == week).collect();
        if idx.is_empty() {
            continue;
        }
        let loc: Vec<[f64; 2]> = idx.iter().map(|&i| locations[observations[i].area]).collect();
        let x: Vec<Vec<f64>> = idx.iter().map(|&i| design[observations[i].area].clone()).collect();
        let y: Vec<f64> = idx.iter().map(|&i| observations[i].theta).collect();
        let b = match bandwidth {
            Some(b) => b,
            None => gwr_bandwidth_cv(&loc, &x, &y, grid, kernel)
                .map_err(|e| Error::Singular(format!("week {week}: {e}")))?,
        };
        let fit = gwr_fit(&loc, &x, &y, b, kernel).map_err(|e| Error::Singular(format!("week {week}: {e}")))?;
        for (k, &i) in idx.iter().enumerate() {
            fitted[i] = fit.fitted[k];
        }
        bandwidths[week - 1] = Some(b);
    }
    Ok(WeeklyGwr { bandwidths, fitted })
}

/// Week-by-week GWR fitted on `train` and evaluated at the `test` cells of
/// the same week. Predictions come back in `test` order.
#[allow(clippy::too_many_arguments)]
pub fn gwr_by_week_predict(
    locations: &[[f64; 2]],
    design: &[Vec<f64>],
    train: &[Observation],
    test: &[Observation],
    weeks: usize,
    bandwidth: Option<f64>,
    grid: &[f64],
    kernel: Kernel,
) -> Result<Vec<f64>> {
    let mut out = vec![f64::NAN; test.len()];
    for week in 1..=weeks {
        let targets: Vec<usize> = (0..test.len()).filter(|&i| test[i].week == week).collect();
        if targets.is_empty() {
            continue;
        }
        let rows: Vec<&Observation> = train.iter().filter(|o| o.week == week).collect();
        if rows.is_empty() {
            return Err(Error::Input(format!("week {week} has held-out cells but no training data")));
        }
        let loc: Vec<[f64; 2]> = rows.iter().map(|o| locations[o.area]).collect();
        let x: Vec<Vec<f64>> = rows.iter().map(|o| design[o.area].clone()).collect();
        let y: Vec<f64> = rows.iter().map(|o| o.theta).collect();
        let b = match bandwidth {
            Some(b) => b,
            None => gwr_bandwidth_cv(&loc, &x, &y, grid, kernel)
                .map_err(|e| Error::Singular(format!("week {week}: {e}")))?,
        };
        let tl: Vec<[f64; 2]> = targets.iter().map(|&i| locations[test[i].area]).collect();
        let tx: Vec<Vec<f64>> = targets.iter().map(|&i| design[test[i].area].clone()).collect();
        let pred = gwr_predict(&loc, &x, &y, &tl, &tx, b, kernel)
            .map_err(|e| Error::Singular(format!("week {week}: {e}")))?;
        for (k, &i) in targets.iter().enumerate() {
            out[i] = pred[k];
        }
    }
    Ok(out)
}
