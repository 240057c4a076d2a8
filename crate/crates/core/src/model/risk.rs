use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::latent::{CoefSummary, INTERCEPT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeRisk {
    pub name: String,
    pub delta: f64,
    pub beta: f64,
    pub rr: f64,
    pub lo95: f64,
    pub hi95: f64,
    pub significant: bool,
}

/// `exp(β·δ)` with interval `exp(CI(β)·δ)`, reordered when `δ < 0`.
pub fn relative_risk(coef: &CoefSummary, delta: f64) -> RelativeRisk {
    let (a, b) = ((coef.lo95 * delta).exp(), (coef.hi95 * delta).exp());
    RelativeRisk {
        name: coef.name.clone(),
        delta,
        beta: coef.mean,
        rr: (coef.mean * delta).exp(),
        lo95: a.min(b),
        hi95: a.max(b),
        significant: coef.significant,
    }
}

/// Relative risks for every covariate (the intercept is skipped). `deltas`
/// maps covariate name to its increment.
pub fn relative_risks(coefs: &[CoefSummary], deltas: &[(String, f64)]) -> Result<Vec<RelativeRisk>> {
    coefs
        .iter()
        .filter(|c| c.name != INTERCEPT)
        .map(|c| {
            let delta = deltas
                .iter()
                .find(|(n, _)| *n == c.name)
                .map(|&(_, d)| d)
                .ok_or_else(|| Error::Parameter(format!("no increment given for covariate '{}'", c.name)))?;
            if !delta.is_finite() {
                return Err(Error::Parameter(format!("increment for '{}' is not finite", c.name)));
            }
            Ok(relative_risk(c, delta))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coef(name: &str, mean: f64) -> CoefSummary {
        CoefSummary { name: name.into(), mean, sd: 0.1, lo95: mean - 0.2, hi95: mean + 0.2, significant: false }
    }

    #[test]
    fn zero_beta_is_unit_risk() {
        let r = relative_risk(&coef("x", 0.0), 17.0);
        assert_eq!(r.rr, 1.0);
    }

    #[test]
    fn missing_delta_fails() {
        let c = vec![coef(INTERCEPT, 1.0), coef("x", 0.1)];
        assert!(relative_risks(&c, &[]).is_err());
        assert_eq!(relative_risks(&c, &[("x".into(), 1.0)]).unwrap().len(), 1);
    }

    #[test]
    fn negative_delta_keeps_order() {
        let r = relative_risk(&coef("x", 0.5), -1.0);
        assert!(r.lo95 <= r.rr && r.rr <= r.hi95);
    }
}
