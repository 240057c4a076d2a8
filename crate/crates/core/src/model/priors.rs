//! Prior specification: Gaussian regression coefficients, penalised
//! complexity priors on the field range, field SD and AR1 coefficient, and a
//! gamma prior on the observation precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial dimension of the field.
const DIM: f64 = 2.0;

/// `P(x < threshold) = prob` or `P(x > threshold) = prob` statements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailStatement {
    pub threshold: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSpec {
    /// Variance of the independent zero-mean Gaussian prior on each coefficient.
    pub beta_variance: f64,
    /// `P(ρ < threshold) = prob`.
    pub range: TailStatement,
    /// `P(σ_ω > threshold) = prob`.
    pub sigma: TailStatement,
    /// `P(α > threshold) = prob`, base model α = 1.
    pub ar1: TailStatement,
    /// Gamma shape on the observation precision `1/σ_e²`.
    pub noise_shape: f64,
    /// Gamma rate on the observation precision `1/σ_e²`.
    pub noise_rate: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            beta_variance: 1000.0,
            range: TailStatement {
                threshold: 1.5,
                prob: 0.5,
            },
            sigma: TailStatement {
                threshold: 1.0,
                prob: 0.01,
            },
            ar1: TailStatement {
                threshold: 0.0,
                prob: 0.9,
            },
            noise_shape: 1.0,
            noise_rate: 5e-5,
        }
    }
}

impl PriorSpec {
    /// Median of the range prior, `λ_ρ / ln 2` raised to `2/d`.
    pub fn range_median(&self) -> Result<f64> {
        let lambdas = calibrate_pc_lambdas(self)?;
        Ok((lambdas.range / std::f64::consts::LN_2).powf(2.0 / DIM))
    }
}

/// Rates of the calibrated penalised complexity priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcLambdas {
    pub range: f64,
    pub sigma: f64,
    pub ar1: f64,
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Calibration(format!("{name} probability must lie in (0, 1), got {p}")))
    }
}

/// Solves each tail statement for the rate of its PC prior.
pub fn calibrate_pc_lambdas(spec: &PriorSpec) -> Result<PcLambdas> {
    check_prob("range", spec.range.prob)?;
    check_prob("sigma", spec.sigma.prob)?;
    check_prob("ar1", spec.ar1.prob)?;
    if !(spec.range.threshold > 0.0) || !(spec.sigma.threshold > 0.0) {
        return Err(Error::Calibration("range and sigma thresholds must be positive".into()));
    }
    if !(spec.beta_variance > 0.0) || !(spec.noise_shape > 0.0) || !(spec.noise_rate > 0.0) {
        return Err(Error::Calibration(
            "beta variance and gamma parameters must be positive".into(),
        ));
    }
    // P(ρ < ρ₀) = exp(-λ ρ₀^{-d/2})
    let range = -spec.range.prob.ln() * spec.range.threshold.powf(DIM / 2.0);
    // P(σ > σ₀) = exp(-λ σ₀)
    let sigma = -spec.sigma.prob.ln() / spec.sigma.threshold;
    let ar1 = calibrate_ar1(spec.ar1.threshold, spec.ar1.prob)?;
    Ok(PcLambdas { range, sigma, ar1 })
}

/// `P(α > u)` under the AR1 PC prior with base model α = 1.
pub fn ar1_upper_tail(lambda: f64, u: f64) -> f64 {
    let num = -(-lambda * (1.0 - u).sqrt()).exp_m1();
    let den = -(-lambda * 2f64.sqrt()).exp_m1();
    num / den
}

fn calibrate_ar1(u: f64, p: f64) -> Result<f64> {
    if !(u > -1.0 && u < 1.0) {
        return Err(Error::Calibration(format!("AR1 threshold must lie in (-1, 1), got {u}")));
    }
    // The tail probability rises from sqrt((1-u)/2) (λ → 0) to 1 (λ → ∞).
    let floor = ((1.0 - u) / 2.0).sqrt();
    if p <= floor {
        return Err(Error::Calibration(format!(
            "P(alpha > {u}) = {p} is unreachable; it must exceed {floor:.6}"
        )));
    }
    let (mut lo, mut hi) = (1e-10f64, 1.0f64);
    while ar1_upper_tail(hi, u) < p {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::Calibration("AR1 rate diverged".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ar1_upper_tail(mid, u) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Log PC prior density of the range (d = 2): `λ ρ⁻² exp(-λ/ρ)`.
pub fn log_range_prior(rho: f64, lambda: f64) -> f64 {
    let half = DIM / 2.0;
    (half * lambda).ln() - (half + 1.0) * rho.ln() - lambda * rho.powf(-half)
}

/// Log PC prior density of the SD: exponential with rate `λ`.
pub fn log_sigma_prior(sigma: f64, lambda: f64) -> f64 {
    lambda.ln() - lambda * sigma
}

/// Log PC prior density of the AR1 coefficient with base model α = 1.
pub fn log_ar1_prior(alpha: f64, lambda: f64) -> f64 {
    let s = (1.0 - alpha).sqrt();
    lambda.ln() - lambda * s - (2.0 * s).ln() - (-(-lambda * 2f64.sqrt()).exp_m1()).ln()
}

/// Log density of `σ_e` when the precision `1/σ_e²` is Gamma(shape, rate).
pub fn log_noise_prior(sigma_e: f64, shape: f64, rate: f64) -> f64 {
    let prec = sigma_e.powi(-2);
    shape * rate.ln() - statrs::function::gamma::ln_gamma(shape) + (shape - 1.0) * prec.ln()
        - rate * prec
        + (2.0f64).ln()
        - 3.0 * sigma_e.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rates() {
        let l = calibrate_pc_lambdas(&PriorSpec::default()).unwrap();
        assert!((l.range - 1.5 * 2f64.ln()).abs() < 1e-12);
        assert!((l.range - 1.0397).abs() < 1e-4);
        assert!((l.sigma - 4.6052).abs() < 1e-4);
        assert!((ar1_upper_tail(l.ar1, 0.0) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn unreachable_ar1_statement_fails() {
        let mut spec = PriorSpec::default();
        spec.ar1.prob = 0.6;
        assert!(matches!(calibrate_pc_lambdas(&spec), Err(Error::Calibration(_))));
        spec.ar1.prob = 1.0;
        assert!(calibrate_pc_lambdas(&spec).is_err());
    }

    #[test]
    fn range_median_matches_statement() {
        assert!((PriorSpec::default().range_median().unwrap() - 1.5).abs() < 1e-12);
    }
}
