use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four model hyperparameters on their natural scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    /// Spatial range in coordinate units.
    pub rho: f64,
    /// SD of the field; see [`SigmaConvention`].
    pub sigma_omega: f64,
    /// AR1 coefficient.
    pub alpha: f64,
    /// Observation SD.
    pub sigma_e: f64,
}

/// How `sigma_omega` scales the space-time field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaConvention {
    /// `σ_ω` is the SD of the innovations `ω_t`; the stationary field SD is
    /// `σ_ω / sqrt(1 - α²)`.
    #[default]
    Innovation,
    /// `σ_ω` is the stationary marginal SD of `ξ_t`.
    Marginal,
}

impl SigmaConvention {
    /// SD of the spatial innovations `ω_t` implied by `hyper`.
    pub fn innovation_sd(self, hyper: &Hyper) -> f64 {
        match self {
            Self::Innovation => hyper.sigma_omega,
            Self::Marginal => hyper.sigma_omega * (1.0 - hyper.alpha * hyper.alpha).sqrt(),
        }
    }
}

impl std::str::FromStr for SigmaConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "innovation" => Ok(Self::Innovation),
            "marginal" => Ok(Self::Marginal),
            other => Err(Error::Parameter(format!(
                "unknown sigma convention '{other}' (expected innovation or marginal)"
            ))),
        }
    }
}

pub const HYPER_NAMES: [&str; 4] = ["rho", "sigma_omega", "alpha", "sigma_e"];

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho > 0.0
            && self.sigma_omega > 0.0
            && self.sigma_e > 0.0
            && self.alpha.abs() < 1.0
            && self.rho.is_finite()
            && self.sigma_omega.is_finite()
            && self.sigma_e.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid hyperparameters {self}")))
        }
    }

    /// `(ln ρ, ln σ_ω, logit((α+1)/2), ln σ_e)`.
    pub fn to_internal(&self) -> [f64; 4] {
        [
            self.rho.ln(),
            self.sigma_omega.ln(),
            logit((self.alpha + 1.0) / 2.0),
            self.sigma_e.ln(),
        ]
    }

    pub fn from_internal(z: &[f64; 4]) -> Self {
        Self {
            rho: z[0].exp(),
            sigma_omega: z[1].exp(),
            alpha: 2.0 * sigmoid(z[2]) - 1.0,
            sigma_e: z[3].exp(),
        }
    }

    /// `ln |d(natural)/d(internal)|`, the density correction for the transform.
    pub fn log_jacobian(&self) -> f64 {
        self.rho.ln()
            + self.sigma_omega.ln()
            + ((1.0 - self.alpha * self.alpha) / 2.0).ln()
            + self.sigma_e.ln()
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.rho, self.sigma_omega, self.alpha, self.sigma_e]
    }
}

/// Maps internal coordinate `i` back to the natural scale.
pub(crate) fn component_from_internal(i: usize, z: f64) -> f64 {
    match i {
        2 => 2.0 * sigmoid(z) - 1.0,
        _ => z.exp(),
    }
}

impl std::fmt::Display for Hyper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "rho={} sigma_omega={} alpha={} sigma_e={}",
            self.rho, self.sigma_omega, self.alpha, self.sigma_e
        )
    }
}
