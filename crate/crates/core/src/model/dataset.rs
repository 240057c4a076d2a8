use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CscMatrix;
use crate::mesh_spde::{build_mesh, build_projector, fem_matrices, FemMatrices, Mesh, MeshParams};

/// One observed log rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Row into [`StDataset::area_ids`].
    pub area: usize,
    /// Week, 1-based.
    pub week: usize,
    pub theta: f64,
}

/// Everything the latent model needs: stacked observations, area design,
/// area-to-mesh projector and the finite element matrices.
///
/// Covariates are per area and constant over weeks; the stacked
/// observation design is derived on demand.
#[derive(Debug, Clone)]
pub struct StDataset {
    pub area_ids: Vec<String>,
    /// Names of the covariate columns, excluding the intercept.
    pub covariate_names: Vec<String>,
    /// One row per area, `p + 1` columns, intercept first.
    pub design: Vec<Vec<f64>>,
    /// `n_areas × m` barycentric projector.
    pub projector: CscMatrix<f64>,
    pub fem: FemMatrices<f64>,
    pub weeks: usize,
    pub observations: Vec<Observation>,
}

impl StDataset {
    pub fn n_areas(&self) -> usize {
        self.area_ids.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.fem.c_diag.len()
    }

    pub fn n_coef(&self) -> usize {
        self.covariate_names.len() + 1
    }

    pub fn n_obs(&self) -> usize {
        self.observations.len()
    }

    /// Length of the latent vector `(β, ξ)`.
    pub fn latent_dim(&self) -> usize {
        self.n_coef() + self.n_nodes() * self.weeks
    }

    pub fn y(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.theta).collect()
    }

    /// Observations per week, `n_t`.
    pub fn counts_per_week(&self) -> Vec<usize> {
        let mut n = vec![0; self.weeks];
        for o in &self.observations {
            n[o.week - 1] += 1;
        }
        n
    }

    pub fn validate(&self) -> Result<()> {
        let (na, m, p1) = (self.n_areas(), self.n_nodes(), self.n_coef());
        if self.weeks == 0 {
            return Err(Error::Input("dataset has no weeks".into()));
        }
        if self.design.len() != na || self.design.iter().any(|r| r.len() != p1) {
            return Err(Error::Input(format!("design must be {na} x {p1}")));
        }
        if self.design.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Input("design contains non-finite values".into()));
        }
        if self.projector.nrows() != na || self.projector.ncols() != m {
            return Err(Error::Input(format!(
                "projector is {} x {}, expected {na} x {m}",
                self.projector.nrows(),
                self.projector.ncols()
            )));
        }
        if self.fem.g.nrows() != m {
            return Err(Error::Input("FEM matrices disagree in size".into()));
        }
        if self.observations.is_empty() {
            return Err(Error::Input("no observations".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for o in &self.observations {
            if o.area >= na || o.week == 0 || o.week > self.weeks {
                return Err(Error::Range(format!(
                    "observation (area {}, week {}) outside {na} areas x {} weeks",
                    o.area, o.week, self.weeks
                )));
            }
            if !o.theta.is_finite() {
                return Err(Error::Input(format!(
                    "non-finite value for {} week {}",
                    self.area_ids[o.area], o.week
                )));
            }
            if !seen.insert((o.area, o.week)) {
                return Err(Error::Input(format!(
                    "duplicate observation for {} week {}",
                    self.area_ids[o.area], o.week
                )));
            }
        }
        Ok(())
    }

    /// Projector rows as `(node, weight)` lists.
    pub(crate) fn projector_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let at = self.projector.transpose();
        (0..self.n_areas()).map(|a| at.col(a).collect()).collect()
    }

    /// Design row of cell `(area, week)` in the latent space `(β, ξ)`.
    pub(crate) fn cell_row(
        &self,
        rows: &[Vec<(usize, f64)>],
        area: usize,
        week: usize,
    ) -> Vec<(usize, f64)> {
        let p1 = self.n_coef();
        let offset = p1 + (week - 1) * self.n_nodes();
        let mut out: Vec<(usize, f64)> = self.design[area].iter().copied().enumerate().collect();
        out.extend(rows[area].iter().map(|&(node, w)| (offset + node, w)));
        out
    }

    /// Observation design `D = [X, A_st]` (`n_obs × (p+1+mT)`).
    pub fn observation_design(&self) -> CscMatrix<f64> {
        let rows = self.projector_rows();
        let mut trip = Vec::new();
        for (i, o) in self.observations.iter().enumerate() {
            for (j, v) in self.cell_row(&rows, o.area, o.week) {
                trip.push((i, j, v));
            }
        }
        CscMatrix::from_triplets(self.n_obs(), self.latent_dim(), &trip)
    }

    /// Restricts to a subset of observations, keeping areas and mesh.
    pub fn with_observations(&self, observations: Vec<Observation>) -> Self {
        Self {
            observations,
            ..self.clone()
        }
    }
}

/// Meshes `locations` and assembles a dataset on that mesh. The result is
/// not validated, so `observations` may still be empty.
pub fn assemble_dataset(
    area_ids: Vec<String>,
    locations: &[[f64; 2]],
    covariate_names: Vec<String>,
    design: Vec<Vec<f64>>,
    weeks: usize,
    observations: Vec<Observation>,
    params: &MeshParams<f64>,
) -> Result<(StDataset, Mesh<f64>)> {
    if locations.len() != area_ids.len() {
        return Err(Error::Input(format!("{} locations for {} areas", locations.len(), area_ids.len())));
    }
    let mesh = build_mesh(locations, params)?;
    let fem = fem_matrices(&mesh)?;
    let projector = build_projector(&mesh, locations)?.a;
    let data = StDataset {
        area_ids,
        covariate_names,
        design,
        projector,
        fem,
        weeks,
        observations,
    };
    Ok((data, mesh))
}
