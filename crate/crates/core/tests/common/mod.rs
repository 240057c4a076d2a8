#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stmap::linalg::CscMatrix;
use stmap::mesh_spde::{fem_matrices, FemMatrices, Mesh};
use stmap::model::{Hyper, Observation, StDataset};

pub const BETA_VAR: f64 = 1000.0;

fn small_fem(m: usize) -> FemMatrices<f64> {
    let mesh = |nodes: Vec<[f64; 2]>, tris: Vec<[usize; 3]>| {
        fem_matrices(&Mesh::from_parts(nodes, tris).unwrap()).unwrap()
    };
    match m {
        1 => FemMatrices {
            c_diag: vec![0.7],
            c: CscMatrix::from_diagonal(&[0.7]),
            g: CscMatrix::from_triplets(1, 1, &[(0, 0, 0.0)]),
        },
        2 => {
            let g = CscMatrix::from_dense(2, 2, &[vec![1.0, -1.0], vec![-1.0, 1.0]]);
            FemMatrices { c_diag: vec![0.5, 0.5], c: CscMatrix::from_diagonal(&[0.5, 0.5]), g }
        }
        3 => mesh(vec![[0.0, 0.0], [1.0, 0.0], [0.3, 0.8]], vec![[0, 1, 2]]),
        4 => mesh(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        ),
        _ => {
            // Fan around a centre node.
            let k = m - 1;
            let mut nodes = vec![[0.0, 0.0]];
            for i in 0..k {
                let a = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                nodes.push([a.cos(), a.sin()]);
            }
            let tris = (0..k).map(|i| [0, 1 + i, 1 + (i + 1) % k]).collect();
            mesh(nodes, tris)
        }
    }
}

/// A random small dataset with `m·T + p + 1` latent dimensions.
pub fn random_fixture(seed: u64, m: usize, weeks: usize, p: usize) -> StDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fem = small_fem(m);
    let n_areas = rng.random_range(2..=5);
    let mut trip = Vec::new();
    for a in 0..n_areas {
        let k = rng.random_range(1..=m.min(3));
        let mut nodes: Vec<usize> = (0..m).collect();
        for i in 0..k {
            let j = rng.random_range(i..m);
            nodes.swap(i, j);
        }
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = w.iter().sum();
        for i in 0..k {
            trip.push((a, nodes[i], w[i] / s));
        }
    }
    let projector = CscMatrix::from_triplets(n_areas, m, &trip);
    let design = (0..n_areas)
        .map(|_| {
            let mut row = vec![1.0];
            row.extend((0..p).map(|_| rng.random_range(-1.0..1.0)));
            row
        })
        .collect();
    let mut observations = Vec::new();
    for week in 1..=weeks {
        for area in 0..n_areas {
            if rng.random_bool(0.75) {
                observations.push(Observation { area, week, theta: rng.random_range(-6.0..-3.0) });
            }
        }
    }
    if observations.is_empty() {
        observations.push(Observation { area: 0, week: 1, theta: -5.0 });
    }
    StDataset {
        area_ids: (0..n_areas).map(|a| format!("A{a}")).collect(),
        covariate_names: (0..p).map(|j| format!("x{j}")).collect(),
        design,
        projector,
        fem,
        weeks,
        observations,
    }
}

pub fn random_hyper(seed: u64) -> Hyper {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    Hyper {
        rho: rng.random_range(0.2..3.0),
        sigma_omega: rng.random_range(0.05..2.0),
        alpha: rng.random_range(-0.95..0.95),
        sigma_e: rng.random_range(0.05..1.0),
    }
}

fn dense(a: &CscMatrix<f64>) -> DMatrix<f64> {
    let rows = a.to_dense();
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| rows[i][j])
}

/// Dense joint-Gaussian algebra for the model, written from the generative
/// recursion rather than from the sparse precision.
pub struct DenseOracle {
    pub prior_cov: DMatrix<f64>,
    pub design: DMatrix<f64>,
    pub y: DVector<f64>,
    pub sigma_e: f64,
}

impl DenseOracle {
    pub fn new(data: &StDataset, h: &Hyper) -> Self {
        let m = data.fem.c_diag.len();
        let t = data.weeks;
        let p1 = data.covariate_names.len() + 1;
        // Spatial innovation precision from the SPDE formula, with innovation SD.
        let kappa = 8f64.sqrt() / h.rho;
        let tau = 1.0 / ((4.0 * std::f64::consts::PI).sqrt() * kappa * h.sigma_omega);
        let c = DMatrix::from_diagonal(&DVector::from_vec(data.fem.c_diag.clone()));
        let c_inv = c.clone().try_inverse().unwrap();
        let g = dense(&data.fem.g);
        let qs = (c * kappa.powi(4) + &g * (2.0 * kappa * kappa) + &g * c_inv * &g) * (tau * tau);
        let sigma_s = qs.try_inverse().unwrap();
        // Cov(ξ_s, ξ_t) = α^|s-t| / (1-α²) Σ_s from ξ_t = α ξ_{t-1} + ω_t.
        let n = p1 + m * t;
        let mut cov = DMatrix::zeros(n, n);
        for i in 0..p1 {
            cov[(i, i)] = BETA_VAR;
        }
        for s in 0..t {
            for u in 0..t {
                let f = h.alpha.powi((s as i32 - u as i32).abs()) / (1.0 - h.alpha * h.alpha);
                for a in 0..m {
                    for b in 0..m {
                        cov[(p1 + s * m + a, p1 + u * m + b)] = f * sigma_s[(a, b)];
                    }
                }
            }
        }
        let amat = dense(&data.projector);
        let nobs = data.observations.len();
        let mut design = DMatrix::zeros(nobs, n);
        for (r, o) in data.observations.iter().enumerate() {
            for j in 0..p1 {
                design[(r, j)] = data.design[o.area][j];
            }
            for node in 0..m {
                design[(r, p1 + (o.week - 1) * m + node)] = amat[(o.area, node)];
            }
        }
        let y = DVector::from_iterator(nobs, data.observations.iter().map(|o| o.theta));
        Self { prior_cov: cov, design, y, sigma_e: h.sigma_e }
    }

    fn marginal_cov(&self) -> DMatrix<f64> {
        let n = self.y.len();
        &self.design * &self.prior_cov * self.design.transpose()
            + DMatrix::identity(n, n) * (self.sigma_e * self.sigma_e)
    }

    /// `log N(y; 0, D Σ_u Dᵀ + σ_e² I)`.
    pub fn log_marginal(&self) -> f64 {
        let s = self.marginal_cov();
        let n = self.y.len() as f64;
        let chol = s.cholesky().unwrap();
        let logdet: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let sol = chol.solve(&self.y);
        -0.5 * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * logdet - 0.5 * self.y.dot(&sol)
    }

    /// Conditional mean and covariance of `u | y`, in information form
    /// `(Σ_u⁻¹ + DᵀD/σ_e²)⁻¹` since the covariance form loses digits when
    /// the coefficient prior is diffuse.
    pub fn conditional(&self) -> (DVector<f64>, DMatrix<f64>) {
        let prec_e = 1.0 / (self.sigma_e * self.sigma_e);
        let prior_prec = self.prior_cov.clone().cholesky().unwrap().inverse();
        let q = prior_prec + self.design.transpose() * &self.design * prec_e;
        let chol = q.cholesky().unwrap();
        let mean = chol.solve(&(self.design.transpose() * &self.y * prec_e));
        (mean, chol.inverse())
    }
}
