//! Synthetic data from the generative model: covariates, a space-time
//! SPDE-AR1 field, Gaussian noise on the log rate, and rounded, censored
//! case counts.

mod bundle;

pub use bundle::write_bundle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Area, AreaTable, CaseRow, CaseTable, CovariateTable, MIN_REPORTED};
use crate::linalg::{CscMatrix, SparseCholesky};
use crate::mesh_spde::{Mesh, MeshParams, SpdeOperator};
use crate::model::{assemble_dataset, Hyper, Observation, SigmaConvention, StDataset};

/// One exact draw from `N(0, Q⁻¹)`.
pub fn draw_latent(q: &CscMatrix<f64>, seed: u64) -> Result<Vec<f64>> {
    let chol = SparseCholesky::new(q).map_err(|e| Error::Numerical(format!("precision factorization: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..q.nrows()).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(chol.sample_from_standard(&z))
}

/// How covariates are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type")]
pub enum CovariateModel {
    /// Independent standard normals.
    Independent,
    /// Standardized Matérn fields with the given range, one per column.
    Spatial { range: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthScenario {
    pub hyper: Hyper,
    /// Intercept first; its length fixes the number of covariates.
    pub beta: Vec<f64>,
    pub n_areas: usize,
    /// Areas are uniform in `[0, width] × [0, height]`.
    pub width: f64,
    pub height: f64,
    pub weeks: usize,
    pub covariates: CovariateModel,
    /// Inclusive population bounds.
    pub population: [u64; 2],
    /// Regions laid out as a `regions[0] × regions[1]` grid over the box.
    pub regions: [usize; 2],
    pub sigma_convention: SigmaConvention,
    /// Mesh settings; derived from the true range when absent.
    pub mesh: Option<MeshParams<f64>>,
    pub seed: u64,
}

impl Default for SynthScenario {
    fn default() -> Self {
        Self {
            hyper: Hyper {
                rho: 0.5,
                sigma_omega: 0.3,
                alpha: 0.9,
                sigma_e: 0.05,
            },
            beta: vec![-5.0, 0.2, -0.1, 0.05],
            n_areas: 120,
            width: 1.0,
            height: 1.0,
            weeks: 30,
            covariates: CovariateModel::Independent,
            population: [5000, 15000],
            regions: [2, 2],
            sigma_convention: SigmaConvention::Innovation,
            mesh: None,
            seed: 1,
        }
    }
}

impl SynthScenario {
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.weeks < 2 {
            return Err(Error::Parameter(format!("scenario needs T >= 2, got {}", self.weeks)));
        }
        if self.n_areas < 3 || self.beta.is_empty() {
            return Err(Error::Parameter("scenario needs at least 3 areas and an intercept".into()));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::Parameter("coordinate box must have positive size".into()));
        }
        if self.population[0] < 1 || self.population[0] > self.population[1] {
            return Err(Error::Parameter(format!("bad population bounds {:?}", self.population)));
        }
        if self.regions.contains(&0) {
            return Err(Error::Parameter("region grid must be at least 1 x 1".into()));
        }
        if let CovariateModel::Spatial { range } = self.covariates {
            if !(range > 0.0) {
                return Err(Error::Parameter("covariate range must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn covariate_names(&self) -> Vec<String> {
        (1..self.beta.len()).map(|j| format!("x{j}")).collect()
    }
}

/// Generating values kept for checking fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub hyper: Hyper,
    pub sigma_convention: SigmaConvention,
    pub beta: Vec<f64>,
    /// Nodal field, week-major (`(t - 1) m + node`).
    pub xi: Vec<f64>,
    /// Noise-free log rate `Xβ + Aξ`, area × week.
    pub signal: Vec<Vec<f64>>,
    /// Log rate with noise, area × week.
    pub theta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub areas: AreaTable,
    pub cases: CaseTable,
    pub covariates: CovariateTable,
    pub data: StDataset,
    pub mesh: Mesh<f64>,
    pub truth: SynthTruth,
}

/// Innovations for weeks `1..=T` by the AR1 recursion with a stationary
/// start; equivalent to one draw from the Kronecker precision.
fn draw_space_time(q_s: &CscMatrix<f64>, alpha: f64, weeks: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let chol = SparseCholesky::new(q_s).map_err(|e| Error::Numerical(format!("spatial precision: {e}")))?;
    let m = q_s.nrows();
    let mut xi = Vec::with_capacity(m * weeks);
    let start = 1.0 / (1.0 - alpha * alpha).sqrt();
    for t in 0..weeks {
        let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
        let w = chol.sample_from_standard(&z);
        if t == 0 {
            xi.extend(w.iter().map(|v| v * start));
        } else {
            let prev = (t - 1) * m;
            for k in 0..m {
                xi.push(alpha * xi[prev + k] + w[k]);
            }
        }
    }
    Ok(xi)
}

fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd > 0.0 {
        v.iter_mut().for_each(|x| *x = (*x - mean) / sd);
    }
}

/// Draws a full synthetic dataset. Identical scenarios give identical
/// output.
pub fn make_synth_dataset(s: &SynthScenario) -> Result<SynthDataset> {
    s.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let n = s.n_areas;
    let width = n.to_string().len();
    let ids: Vec<String> = (1..=n).map(|i| format!("A{i:0width$}")).collect();
    let locs: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random::<f64>() * s.width, rng.random::<f64>() * s.height])
        .collect();
    let pops: Vec<u64> = (0..n).map(|_| rng.random_range(s.population[0]..=s.population[1])).collect();
    let region = |p: [f64; 2]| {
        let cx = ((p[0] / s.width * s.regions[0] as f64) as usize).min(s.regions[0] - 1);
        let cy = ((p[1] / s.height * s.regions[1] as f64) as usize).min(s.regions[1] - 1);
        format!("R{}", cy * s.regions[0] + cx + 1)
    };

    let params = s.mesh.unwrap_or_else(|| MeshParams::from_data(&locs, s.hyper.rho));
    let p = s.beta.len() - 1;
    let (mut data, mesh) = assemble_dataset(ids.clone(), &locs, s.covariate_names(), Vec::new(), s.weeks, Vec::new(), &params)?;
    let spde = SpdeOperator::new(&data.fem)?;

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(p);
    for _ in 0..p {
        let mut col: Vec<f64> = match s.covariates {
            CovariateModel::Independent => (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
            CovariateModel::Spatial { range } => {
                let q = spde.precision_from_range(range, 1.0)?;
                let field = draw_latent(&q, rng.random())?;
                data.projector.mul_vec(&field)
            }
        };
        if matches!(s.covariates, CovariateModel::Spatial { .. }) {
            standardize(&mut col);
        }
        columns.push(col);
    }
    data.design = (0..n)
        .map(|i| std::iter::once(1.0).chain(columns.iter().map(|c| c[i])).collect())
        .collect();

    let q_s = spde.precision_from_range(s.hyper.rho, s.sigma_convention.innovation_sd(&s.hyper))?;
    let xi = draw_space_time(&q_s, s.hyper.alpha, s.weeks, &mut rng)?;
    let m = data.n_nodes();
    let fixed: Vec<f64> = data.design.iter().map(|r| r.iter().zip(&s.beta).map(|(x, b)| x * b).sum()).collect();
    let mut signal = vec![vec![0.0; s.weeks]; n];
    let mut theta = vec![vec![0.0; s.weeks]; n];
    let mut rows = Vec::new();
    let mut observations = Vec::new();
    for t in 0..s.weeks {
        let field = data.projector.mul_vec(&xi[t * m..(t + 1) * m]);
        for i in 0..n {
            signal[i][t] = fixed[i] + field[i];
            let e: f64 = StandardNormal.sample(&mut rng);
            theta[i][t] = signal[i][t] + s.hyper.sigma_e * e;
        }
    }
    for (i, row) in theta.iter().enumerate() {
        for (t, th) in row.iter().enumerate() {
            let expected = pops[i] as f64 * th.exp();
            if !(expected.is_finite() && expected < 1e15) {
                return Err(Error::Generation(format!("count overflow for {} week {}", ids[i], t + 1)));
            }
            let cases = expected.round() as u64;
            if cases >= MIN_REPORTED {
                rows.push(CaseRow { area: i, week: t + 1, cases });
                observations.push(Observation {
                    area: i,
                    week: t + 1,
                    theta: (cases as f64 / pops[i] as f64).ln(),
                });
            }
        }
    }
    if observations.is_empty() {
        return Err(Error::Generation("every generated cell is censored".into()));
    }
    rows.sort_by_key(|r| (r.week, r.area));
    observations.sort_by_key(|o| (o.week, o.area));
    data.observations = observations;
    data.validate()?;

    let areas = AreaTable::new(
        (0..n)
            .map(|i| Area {
                area_id: ids[i].clone(),
                x: locs[i][0],
                y: locs[i][1],
                population: pops[i],
                region_id: region(locs[i]),
                polygon: None,
            })
            .collect(),
    )?;
    let covariates = CovariateTable {
        names: s.covariate_names(),
        area_ids: ids.clone(),
        values: (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect(),
    };
    let cases = CaseTable {
        area_ids: ids,
        rows,
        weeks: s.weeks,
    };
    Ok(SynthDataset {
        areas,
        cases,
        covariates,
        data,
        mesh,
        truth: SynthTruth {
            hyper: s.hyper,
            sigma_convention: s.sigma_convention,
            beta: s.beta.clone(),
            xi,
            signal,
            theta,
        },
    })
}
