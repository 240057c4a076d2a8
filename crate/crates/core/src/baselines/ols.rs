use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold on the diagonal of `R` below which a column is
/// treated as linearly dependent on the earlier ones.
const RANK_TOL: f64 = 1e-10;

/// Least squares by Householder QR. Columns are scaled to unit norm first
/// so the rank test does not depend on units. On rank deficiency the error
/// carries the index of the first dependent column.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> std::result::Result<DVector<f64>, usize> {
    let (n, p) = x.shape();
    if n < p {
        return Err(p.saturating_sub(1));
    }
    let norms: Vec<f64> = (0..p).map(|j| x.column(j).norm()).collect();
    if let Some(j) = norms.iter().position(|&v| !(v > 0.0)) {
        return Err(j);
    }
    let mut xs = x.clone();
    for (j, &s) in norms.iter().enumerate() {
        xs.column_mut(j).scale_mut(1.0 / s);
    }
    let qr = xs.qr();
    let r = qr.r();
    let rmax = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if let Some(j) = (0..p).find(|&j| r[(j, j)].abs() <= RANK_TOL * rmax.max(1.0)) {
        return Err(j);
    }
    let qty = qr.q().transpose() * y;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or(p - 1)?;
    Ok(DVector::from_iterator(p, coef.iter().zip(&norms).map(|(c, s)| c / s)))
}

/// Global least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub beta: Vec<f64>,
    pub fitted: Vec<f64>,
}

/// Ordinary least squares; `x` rows are observations, intercept included
/// by the caller.
pub fn ols_fit(x: &[Vec<f64>], y: &[f64]) -> Result<OlsFit> {
    let n = y.len();
    let p = x.first().map_or(0, Vec::len);
    if x.len() != n || p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(Error::Input("design and response disagree in shape".into()));
    }
    if n <= p {
        return Err(Error::Singular(format!("{n} observations for {p} coefficients")));
    }
    let xm = DMatrix::from_fn(n, p, |i, j| x[i][j]);
    let yv = DVector::from_column_slice(y);
    let beta = least_squares(&xm, &yv)
        .map_err(|j| Error::Singular(format!("design column {j} is linearly dependent")))?;
    let fitted = (&xm * &beta).iter().copied().collect();
    Ok(OlsFit {
        beta: beta.iter().copied().collect(),
        fitted,
    })
}
