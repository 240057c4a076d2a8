use crate::error::{Error, Result};
use crate::linalg::CscMatrix;
use crate::scalar::Real;

use super::fem::FemMatrices;
use super::matern::{convert_params, range_and_sd};

/// Precision of the discretized Matérn field.
#[derive(Debug, Clone)]
pub struct SpatialPrecision<T> {
    pub q: CscMatrix<T>,
    pub kappa: T,
    pub tau: T,
}

impl<T: Real> SpatialPrecision<T> {
    /// `(ρ, σ)` implied by `(κ, τ)`.
    pub fn range_and_sd(&self) -> (T, T) {
        range_and_sd(self.kappa, self.tau).expect("validated at construction")
    }
}

/// The three SPDE building blocks `C`, `G`, `G C⁻¹ G` aligned on one sparsity
/// pattern, so `Q(κ, τ)` is an elementwise combination with a fixed pattern.
#[derive(Debug, Clone)]
pub struct SpdeOperator<T> {
    mass: CscMatrix<T>,
    stiffness: CscMatrix<T>,
    stiffness2: CscMatrix<T>,
}

impl<T: Real> SpdeOperator<T> {
    pub fn new(fem: &FemMatrices<T>) -> Result<Self> {
        if fem.c_diag.iter().any(|&c| !(c > T::zero())) {
            return Err(Error::Geometry("lumped mass must be positive".into()));
        }
        let c_inv: Vec<T> = fem.c_diag.iter().map(|&c| T::one() / c).collect();
        let k = fem.g.matmul(&CscMatrix::from_diagonal(&c_inv)).matmul(&fem.g);
        let zero = T::zero();
        let union = CscMatrix::linear_combination(zero, &k, zero, &fem.g);
        let union = CscMatrix::linear_combination(T::one(), &union, zero, &fem.c);
        let align = |x: &CscMatrix<T>| CscMatrix::linear_combination(T::one(), x, zero, &union);
        Ok(Self {
            mass: align(&fem.c),
            stiffness: align(&fem.g),
            stiffness2: align(&k),
        })
    }

    pub fn dim(&self) -> usize {
        self.mass.ncols()
    }

    /// `τ² (κ⁴ C + 2 κ² G + G C⁻¹ G)`.
    pub fn precision(&self, kappa: T, tau: T) -> CscMatrix<T> {
        let t2 = tau * tau;
        let (a, b) = (t2 * kappa.powi(4), t2 * T::lit(2.0) * kappa * kappa);
        let mut q = self.mass.clone();
        for (((v, &c), &g), &k) in q
            .data_mut()
            .iter_mut()
            .zip(self.mass.data())
            .zip(self.stiffness.data())
            .zip(self.stiffness2.data())
        {
            *v = a * c + b * g + t2 * k;
        }
        q
    }

    /// Precision for range `rho` and marginal SD `sigma`.
    pub fn precision_from_range(&self, rho: T, sigma: T) -> Result<CscMatrix<T>> {
        let (kappa, tau) = convert_params(rho, sigma)?;
        Ok(self.precision(kappa, tau))
    }
}

/// Builds `Q_s = τ² (κ⁴ C + 2 κ² G + G C⁻¹ G)`.
pub fn spde_precision<T: Real>(fem: &FemMatrices<T>, kappa: T, tau: T) -> Result<SpatialPrecision<T>> {
    if !(kappa > T::zero()) || !(tau > T::zero()) {
        return Err(Error::Parameter(format!(
            "kappa and tau must be positive (kappa={kappa}, tau={tau})"
        )));
    }
    let op = SpdeOperator::new(fem)?;
    Ok(SpatialPrecision {
        q: op.precision(kappa, tau),
        kappa,
        tau,
    })
}
