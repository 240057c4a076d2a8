use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::linalg::{CscMatrix, SparseCholesky, SymbolicCholesky};
use crate::mesh_spde::SpdeOperator;

use super::ar1::st_precision;
use super::dataset::StDataset;
use super::hyper::{Hyper, SigmaConvention};
use super::kron::{KronData, KronFactor};
use super::priors::{
    calibrate_pc_lambdas, log_ar1_prior, log_noise_prior, log_range_prior, log_sigma_prior,
    PcLambdas, PriorSpec,
};

/// Gaussian conditional `u | y, hyper`.
pub struct Conditional {
    /// `Q_c⁻¹ b`.
    pub mean: Vec<f64>,
    pub log_marginal_likelihood: f64,
    sampler: Sampler,
}

enum Sampler {
    /// Factor of `Q_c`.
    Precision(SparseCholesky<f64>),
    /// Factor in the eigenbasis of the AR1 precision.
    Kron(Box<KronFactor>),
    /// Covariance form, used when `Q_c` is too ill-conditioned to factor
    /// (tiny observation noise). Draws by conditioning a prior draw.
    Kriging {
        prior: SparseCholesky<f64>,
        design: CscMatrix<f64>,
        /// `Q_u⁻¹ Dᵀ`, one column per observation.
        gain: Vec<Vec<f64>>,
        s_chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
        sigma_e: f64,
    },
}

impl Conditional {
    /// Number of standard normals consumed by [`Self::sample_deviation`].
    pub fn normals_needed(&self) -> usize {
        match &self.sampler {
            Sampler::Precision(f) => f.dim(),
            Sampler::Kron(f) => f.normals_needed(),
            Sampler::Kriging { prior, design, .. } => prior.dim() + design.nrows(),
        }
    }

    /// Maps standard normals to a draw of `u - mean`.
    pub fn sample_deviation(&self, z: &[f64]) -> Vec<f64> {
        match &self.sampler {
            Sampler::Precision(f) => f.sample_from_standard(z),
            Sampler::Kron(f) => f.sample_deviation(z),
            Sampler::Kriging { prior, design, gain, s_chol, sigma_e } => {
                let dim = prior.dim();
                let mut u = prior.sample_from_standard(&z[..dim]);
                let du = design.mul_vec(&u);
                let r = nalgebra::DVector::from_iterator(
                    du.len(),
                    du.iter().zip(&z[dim..]).map(|(a, e)| a + sigma_e * e),
                );
                let w = s_chol.solve(&r);
                for (col, &wi) in gain.iter().zip(w.iter()) {
                    for (ui, c) in u.iter_mut().zip(col) {
                        *ui -= c * wi;
                    }
                }
                u
            }
        }
    }

    /// Whether the eigenbasis path was used.
    pub fn is_structured(&self) -> bool {
        matches!(self.sampler, Sampler::Kron(_))
    }

    /// Whether the covariance-form fallback was used.
    pub fn is_kriging(&self) -> bool {
        matches!(self.sampler, Sampler::Kriging { .. })
    }
}

/// Largest `dim × n_obs` for which the covariance-form fallback is tried.
const KRIGING_LIMIT: usize = 20_000_000;

/// The latent Gaussian model for a fixed dataset. Quantities that do not
/// depend on the hyperparameters are computed once, and the symbolic
/// factorizations are shared between evaluations.
pub struct LatentModel<'a> {
    data: &'a StDataset,
    priors: PriorSpec,
    lambdas: PcLambdas,
    convention: SigmaConvention,
    spde: SpdeOperator<f64>,
    dtd: CscMatrix<f64>,
    dty: Vec<f64>,
    yty: f64,
    design: CscMatrix<f64>,
    qc_symbolic: OnceLock<Arc<SymbolicCholesky>>,
    qs_symbolic: OnceLock<Arc<SymbolicCholesky>>,
    kron: Option<KronData>,
}

impl<'a> LatentModel<'a> {
    pub fn new(data: &'a StDataset, priors: PriorSpec, convention: SigmaConvention) -> Result<Self> {
        data.validate()?;
        let lambdas = calibrate_pc_lambdas(&priors)?;
        let spde = SpdeOperator::new(&data.fem)?;
        let design = data.observation_design();
        let dt = design.transpose();
        let dtd = dt.matmul(&design);
        let y = data.y();
        let dty = dt.mul_vec(&y);
        let yty = y.iter().map(|v| v * v).sum();
        Ok(Self {
            data,
            priors,
            lambdas,
            convention,
            spde,
            dtd,
            dty,
            yty,
            design,
            qc_symbolic: OnceLock::new(),
            qs_symbolic: OnceLock::new(),
            kron: KronData::new(data),
        })
    }

    /// Turns off the eigenbasis path so every evaluation factors the full
    /// posterior precision.
    pub fn disable_structured(&mut self) {
        self.kron = None;
    }

    pub fn data(&self) -> &StDataset {
        self.data
    }

    pub fn priors(&self) -> &PriorSpec {
        &self.priors
    }

    pub fn lambdas(&self) -> &PcLambdas {
        &self.lambdas
    }

    pub fn convention(&self) -> SigmaConvention {
        self.convention
    }

    /// Observation design `D`.
    pub fn design(&self) -> &CscMatrix<f64> {
        &self.design
    }

    /// Spatial precision of the innovations `ω_t` at `hyper`.
    pub fn spatial_precision(&self, hyper: &Hyper) -> Result<CscMatrix<f64>> {
        self.spde.precision_from_range(hyper.rho, self.convention.innovation_sd(hyper))
    }

    /// Prior precision of `u = (β, ξ)`: `blockdiag(I / var_β, Q_st)`.
    pub fn prior_precision(&self, hyper: &Hyper) -> Result<CscMatrix<f64>> {
        let qs = self.spatial_precision(hyper)?;
        let qst = st_precision(&qs, hyper.alpha, self.data.weeks)?;
        let beta = CscMatrix::from_diagonal(&vec![1.0 / self.priors.beta_variance; self.data.n_coef()]);
        Ok(CscMatrix::block_diag(&[&beta, &qst]))
    }

    fn numerical(&self, hyper: &Hyper, what: &str, e: Error) -> Error {
        Error::Numerical(format!("{what} failed at {hyper}: {e}"))
    }

    fn factor_with(
        &self,
        cache: &OnceLock<Arc<SymbolicCholesky>>,
        a: &CscMatrix<f64>,
    ) -> Result<SparseCholesky<f64>> {
        if let Some(sym) = cache.get() {
            return sym.factor(a);
        }
        let sym = Arc::new(SymbolicCholesky::analyze(a)?);
        let sym = cache.get_or_init(|| sym).clone();
        sym.factor(a)
    }

    /// `log|Q_u|`.
    fn prior_log_det(&self, hyper: &Hyper) -> Result<f64> {
        let qs = self.spatial_precision(hyper)?;
        let chol = self
            .factor_with(&self.qs_symbolic, &qs)
            .map_err(|e| self.numerical(hyper, "spatial factorization", e))?;
        let (m, t) = (self.data.n_nodes() as f64, self.data.weeks as f64);
        Ok(self.data.n_coef() as f64 * (1.0 / self.priors.beta_variance).ln()
            + m * super::ar1::ar1_log_det(hyper.alpha)
            + t * chol.log_det())
    }

    /// Exact conditional posterior of the latent vector, together with the
    /// Gaussian log marginal likelihood `log p(y | hyper)`.
    pub fn conditional(&self, hyper: &Hyper) -> Result<Conditional> {
        hyper.validate()?;
        if self.kron.is_some() {
            if let Ok(c) = self.kron_form(hyper) {
                return Ok(c);
            }
        }
        let qu = self.prior_precision(hyper)?;
        match self.precision_form(hyper, &qu) {
            Err(err @ Error::Numerical(_))
                if self.data.latent_dim() * self.data.n_obs() <= KRIGING_LIMIT =>
            {
                self.kriging_form(hyper, &qu).map_err(|_| err)
            }
            other => other,
        }
    }

    fn precision_form(&self, hyper: &Hyper, qu: &CscMatrix<f64>) -> Result<Conditional> {
        let prec_e = hyper.sigma_e.powi(-2);
        let qc = CscMatrix::linear_combination(1.0, qu, prec_e, &self.dtd);
        let factor = self
            .factor_with(&self.qc_symbolic, &qc)
            .map_err(|e| self.numerical(hyper, "posterior factorization", e))?;
        let b: Vec<f64> = self.dty.iter().map(|v| v * prec_e).collect();
        let mean = factor.solve(&b);
        let b_mean: f64 = b.iter().zip(&mean).map(|(x, y)| x * y).sum();
        let n = self.data.n_obs() as f64;
        let lml = 0.5 * self.prior_log_det(hyper)? - 0.5 * factor.log_det()
            - 0.5 * n * (2.0 * std::f64::consts::PI * hyper.sigma_e * hyper.sigma_e).ln()
            - 0.5 * (self.yty * prec_e - b_mean);
        if !lml.is_finite() {
            return Err(Error::Numerical(format!("non-finite likelihood at {hyper}")));
        }
        Ok(Conditional {
            mean,
            log_marginal_likelihood: lml,
            sampler: Sampler::Precision(factor),
        })
    }

    /// `Q_u x` without assembling the Kronecker product.
    fn prior_mul(&self, qs: &CscMatrix<f64>, alpha: f64, x: &[f64]) -> Vec<f64> {
        let (p1, m, t) = (self.data.n_coef(), self.data.n_nodes(), self.data.weeks);
        let mut out: Vec<f64> = x[..p1].iter().map(|v| v / self.priors.beta_variance).collect();
        let sx: Vec<Vec<f64>> = (0..t).map(|k| qs.mul_vec(&x[p1 + k * m..p1 + (k + 1) * m])).collect();
        for k in 0..t {
            let d = if t == 1 {
                1.0 - alpha * alpha
            } else if k == 0 || k == t - 1 {
                1.0
            } else {
                1.0 + alpha * alpha
            };
            out.extend((0..m).map(|i| {
                let mut v = d * sx[k][i];
                if k > 0 {
                    v -= alpha * sx[k - 1][i];
                }
                if k + 1 < t {
                    v -= alpha * sx[k + 1][i];
                }
                v
            }));
        }
        out
    }

    fn kron_form(&self, hyper: &Hyper) -> Result<Conditional> {
        let kron = self.kron.as_ref().expect("checked by caller");
        let prec_e = hyper.sigma_e.powi(-2);
        let qs = self.spatial_precision(hyper)?;
        let b: Vec<f64> = self.dty.iter().map(|v| v * prec_e).collect();
        let f = kron.factor(&qs, hyper.alpha, prec_e, 1.0 / self.priors.beta_variance, &b)?;
        // Guard against an inaccurate eigenbasis or correction.
        let r1 = self.prior_mul(&qs, hyper.alpha, &f.mean);
        let r2 = self.dtd.mul_vec(&f.mean);
        let (mut res, mut norm) = (0.0, 0.0);
        for i in 0..b.len() {
            res += (r1[i] + prec_e * r2[i] - b[i]).powi(2);
            norm += b[i] * b[i];
        }
        if !(res.sqrt() <= 1e-6 * norm.sqrt().max(f64::MIN_POSITIVE)) {
            return Err(Error::Numerical(format!("structured solve is inaccurate at {hyper}")));
        }
        let n = self.data.n_obs() as f64;
        let lml = 0.5 * self.prior_log_det(hyper)? - 0.5 * f.log_det
            - 0.5 * n * (2.0 * std::f64::consts::PI * hyper.sigma_e * hyper.sigma_e).ln()
            - 0.5 * (self.yty * prec_e - f.b_quad);
        if !lml.is_finite() {
            return Err(Error::Numerical(format!("non-finite likelihood at {hyper}")));
        }
        let mut f = f;
        let mean = std::mem::take(&mut f.mean);
        Ok(Conditional {
            mean,
            log_marginal_likelihood: lml,
            sampler: Sampler::Kron(Box::new(f)),
        })
    }

    /// `u | y` from the covariance of the observations,
    /// `S = D Q_u⁻¹ Dᵀ + σ_e² I`.
    fn kriging_form(&self, hyper: &Hyper, qu: &CscMatrix<f64>) -> Result<Conditional> {
        use rayon::prelude::*;
        let prior = SparseCholesky::new(qu).map_err(|e| self.numerical(hyper, "prior factorization", e))?;
        let dt = self.design.transpose();
        let n = self.data.n_obs();
        let dim = self.data.latent_dim();
        let gain: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut d = vec![0.0; dim];
                for (j, v) in dt.col(i) {
                    d[j] = v;
                }
                prior.solve(&d)
            })
            .collect();
        let s2 = hyper.sigma_e * hyper.sigma_e;
        let s = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            let v: f64 = dt.col(i).map(|(k, x)| x * gain[j][k]).sum();
            if i == j {
                v + s2
            } else {
                v
            }
        });
        let s = (&s + s.transpose()) * 0.5;
        let s_chol = s
            .cholesky()
            .ok_or_else(|| Error::Numerical(format!("observation covariance is singular at {hyper}")))?;
        let y = nalgebra::DVector::from_vec(self.data.y());
        let w = s_chol.solve(&y);
        let mut mean = vec![0.0; dim];
        for (col, &wi) in gain.iter().zip(w.iter()) {
            for (m, c) in mean.iter_mut().zip(col) {
                *m += c * wi;
            }
        }
        let log_det: f64 = s_chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let lml = -0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det - 0.5 * y.dot(&w);
        if !lml.is_finite() {
            return Err(Error::Numerical(format!("non-finite likelihood at {hyper}")));
        }
        Ok(Conditional {
            mean,
            log_marginal_likelihood: lml,
            sampler: Sampler::Kriging {
                prior,
                design: self.design.clone(),
                gain,
                s_chol,
                sigma_e: hyper.sigma_e,
            },
        })
    }

    pub fn log_marginal_likelihood(&self, hyper: &Hyper) -> Result<f64> {
        Ok(self.conditional(hyper)?.log_marginal_likelihood)
    }

    /// Sum of the four hyperparameter log prior densities (natural scale).
    pub fn log_prior(&self, hyper: &Hyper) -> f64 {
        log_range_prior(hyper.rho, self.lambdas.range)
            + log_sigma_prior(hyper.sigma_omega, self.lambdas.sigma)
            + log_ar1_prior(hyper.alpha, self.lambdas.ar1)
            + log_noise_prior(hyper.sigma_e, self.priors.noise_shape, self.priors.noise_rate)
    }

    /// `log p(hyper | y)` up to a constant.
    pub fn log_hyper_posterior(&self, hyper: &Hyper) -> Result<f64> {
        Ok(self.log_marginal_likelihood(hyper)? + self.log_prior(hyper))
    }

    /// Objective in the internal parameterization, including the Jacobian.
    pub fn internal_objective(&self, z: &[f64; 4]) -> Result<f64> {
        let h = Hyper::from_internal(z);
        Ok(self.log_hyper_posterior(&h)? + h.log_jacobian())
    }
}

/// Convenience wrapper: `log p(hyper | y)` up to a constant.
pub fn log_hyper_posterior(
    hyper: &Hyper,
    data: &StDataset,
    priors: &PriorSpec,
    convention: SigmaConvention,
) -> Result<f64> {
    LatentModel::new(data, *priors, convention)?.log_hyper_posterior(hyper)
}
