use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ols::least_squares;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `exp(-d² / (2b²))`.
    #[default]
    Gaussian,
    /// `(1 - (d/b)²)²` inside the bandwidth, zero outside.
    Bisquare,
}

impl Kernel {
    pub fn weight(self, d: f64, b: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * (d / b).powi(2)).exp(),
            Kernel::Bisquare => {
                if d < b {
                    (1.0 - (d / b).powi(2)).powi(2)
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Kernel::Gaussian),
            "bisquare" => Ok(Kernel::Bisquare),
            other => Err(Error::Parameter(format!("unknown kernel '{other}'"))),
        }
    }
}

/// Local regression coefficients at every location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GwrFit {
    pub bandwidth: f64,
    /// One coefficient vector per location.
    pub coefficients: Vec<Vec<f64>>,
    pub fitted: Vec<f64>,
}

fn check_inputs(locations: &[[f64; 2]], x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    let n = y.len();
    let p = x.first().map_or(0, Vec::len);
    if locations.len() != n || x.len() != n || p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(Error::Input("locations, design and response disagree in shape".into()));
    }
    Ok(p)
}

/// Weighted least squares centred on `at`; `skip` leaves out one row.
fn local_fit_at(
    locations: &[[f64; 2]],
    x: &[Vec<f64>],
    y: &[f64],
    at: [f64; 2],
    bandwidth: f64,
    kernel: Kernel,
    skip: Option<usize>,
) -> Option<DVector<f64>> {
    let p = x[0].len();
    let rows: Vec<(usize, f64)> = (0..y.len())
        .filter(|&j| skip != Some(j))
        .map(|j| {
            let d = ((at[0] - locations[j][0]).powi(2) + (at[1] - locations[j][1]).powi(2)).sqrt();
            (j, kernel.weight(d, bandwidth).sqrt())
        })
        .filter(|&(_, w)| w > 0.0)
        .collect();
    if rows.len() < p {
        return None;
    }
    let xm = DMatrix::from_fn(rows.len(), p, |r, c| rows[r].1 * x[rows[r].0][c]);
    let yv = DVector::from_iterator(rows.len(), rows.iter().map(|&(j, w)| w * y[j]));
    least_squares(&xm, &yv).ok()
}

/// Weighted least squares at location `i`; `skip_self` leaves out row `i`.
fn local_fit(
    locations: &[[f64; 2]],
    x: &[Vec<f64>],
    y: &[f64],
    i: usize,
    bandwidth: f64,
    kernel: Kernel,
    skip_self: bool,
) -> Option<DVector<f64>> {
    local_fit_at(locations, x, y, locations[i], bandwidth, kernel, skip_self.then_some(i))
}

fn predict(x: &[f64], beta: &DVector<f64>) -> f64 {
    x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum()
}

/// Geographically weighted regression at the data locations.
pub fn gwr_fit(
    locations: &[[f64; 2]],
    x: &[Vec<f64>],
    y: &[f64],
    bandwidth: f64,
    kernel: Kernel,
) -> Result<GwrFit> {
    check_inputs(locations, x, y)?;
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::Parameter(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let betas: Vec<Option<DVector<f64>>> = (0..y.len())
        .into_par_iter()
        .map(|i| local_fit(locations, x, y, i, bandwidth, kernel, false))
        .collect();
    let mut coefficients = Vec::with_capacity(y.len());
    let mut fitted = Vec::with_capacity(y.len());
    for (i, b) in betas.into_iter().enumerate() {
        let b = b.ok_or_else(|| {
            Error::Singular(format!(
                "weighted design is singular at location {i} ({}, {})",
                locations[i][0], locations[i][1]
            ))
        })?;
        fitted.push(predict(&x[i], &b));
        coefficients.push(b.iter().copied().collect());
    }
    Ok(GwrFit {
        bandwidth,
        coefficients,
        fitted,
    })
}

/// Predictions at new locations from local fits to the given data.
pub fn gwr_predict(
    locations: &[[f64; 2]],
    x: &[Vec<f64>],
    y: &[f64],
    targets: &[[f64; 2]],
    target_x: &[Vec<f64>],
    bandwidth: f64,
    kernel: Kernel,
) -> Result<Vec<f64>> {
    let p = check_inputs(locations, x, y)?;
    if targets.len() != target_x.len() || target_x.iter().any(|r| r.len() != p) {
        return Err(Error::Input("targets and their design disagree in shape".into()));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::Parameter(format!("bandwidth must be positive, got {bandwidth}")));
    }
    targets
        .par_iter()
        .zip(target_x)
        .map(|(&at, xr)| {
            let b = local_fit_at(locations, x, y, at, bandwidth, kernel, None).ok_or_else(|| {
                Error::Singular(format!("weighted design is singular at ({}, {})", at[0], at[1]))
            })?;
            Ok(predict(xr, &b))
        })
        .collect()
}

/// Leave-one-out squared prediction error for one bandwidth, or `None` if
/// any local fit is singular.
pub fn gwr_cv_score(
    locations: &[[f64; 2]],
    x: &[Vec<f64>],
    y: &[f64],
    bandwidth: f64,
    kernel: Kernel,
) -> Option<f64> {
    let errs: Vec<Option<f64>> = (0..y.len())
        .into_par_iter()
        .map(|i| {
            let b = local_fit(locations, x, y, i, bandwidth, kernel, true)?;
            Some((y[i] - predict(&x[i], &b)).powi(2))
        })
        .collect();
    errs.into_iter().sum()
}

/// The grid bandwidth with the smallest leave-one-out error; ties go to
/// the smaller bandwidth.
pub fn gwr_bandwidth_cv(
    locations: &[[f64; 2]],
    x: &[Vec<f64>],
    y: &[f64],
    grid: &[f64],
    kernel: Kernel,
) -> Result<f64> {
    check_inputs(locations, x, y)?;
    if grid.is_empty() {
        return Err(Error::Parameter("bandwidth grid is empty".into()));
    }
    let mut sorted: Vec<f64> = grid.to_vec();
    if sorted.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::Parameter("bandwidths must be positive".into()));
    }
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64)> = None;
    for b in sorted {
        if let Some(score) = gwr_cv_score(locations, x, y, b, kernel) {
            if best.is_none_or(|(s, _)| score < s) {
                best = Some((score, b));
            }
        }
    }
    best.map(|(_, b)| b)
        .ok_or_else(|| Error::Singular("every candidate bandwidth gives a singular local fit".into()))
}
