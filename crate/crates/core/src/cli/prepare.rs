use crate::error::{Error, Result};
use crate::ingest::{
    compute_log_rates, grid_to_area_average, load_area_table, load_case_table, load_covariates, load_grid,
    load_polygons, log_transform_density, AreaTable, CaseTable, CovariateTable,
};
use crate::mesh_spde::{Mesh, MeshParams};
use crate::model::{assemble_dataset, Observation, StDataset};

use super::config::PipelineConfig;

/// Inputs loaded, joined and transformed, in area-table order.
pub struct Prepared {
    pub areas: AreaTable,
    pub cases: CaseTable,
    /// Every available covariate after transforms, one row per area.
    pub covariates: CovariateTable,
    /// Model covariates, in order.
    pub names: Vec<String>,
    /// `[1, x...]` per area.
    pub design: Vec<Vec<f64>>,
    pub observations: Vec<Observation>,
}

impl Prepared {
    pub fn locations(&self) -> Vec<[f64; 2]> {
        self.areas.centroids()
    }

    /// Raw model covariate columns.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        (1..=self.names.len()).map(|j| self.design.iter().map(|r| r[j]).collect()).collect()
    }

    pub fn mesh_params(&self, cfg: &PipelineConfig) -> MeshParams<f64> {
        cfg.mesh.unwrap_or_else(|| MeshParams::from_data(&self.locations(), cfg.priors.range.threshold))
    }

    pub fn dataset(&self, cfg: &PipelineConfig, observations: Vec<Observation>) -> Result<(StDataset, Mesh<f64>)> {
        let ids = self.areas.areas.iter().map(|a| a.area_id.clone()).collect();
        assemble_dataset(
            ids,
            &self.locations(),
            self.names.clone(),
            self.design.clone(),
            cfg.weeks,
            observations,
            &self.mesh_params(cfg),
        )
    }
}

pub fn prepare(cfg: &PipelineConfig) -> Result<Prepared> {
    cfg.validate_inputs()?;
    let inputs = &cfg.inputs;
    let mut areas = load_area_table(&inputs.areas)?;
    if let Some(p) = &inputs.polygons {
        areas.attach_polygons(load_polygons(p)?)?;
    }
    let cases = load_case_table(&inputs.cases, cfg.weeks)?;

    let ids: Vec<String> = areas.areas.iter().map(|a| a.area_id.clone()).collect();
    let mut covariates = match &inputs.covariates {
        Some(p) => {
            let raw = load_covariates(p)?;
            let values = raw.aligned(&areas, &raw.names)?;
            CovariateTable { names: raw.names, area_ids: ids, values }
        }
        None => CovariateTable { names: Vec::new(), area_ids: ids, values: vec![Vec::new(); areas.len()] },
    };
    // Grid cells share the raw coordinate system of the polygons.
    if let Some(p) = &inputs.grid {
        let grid = load_grid(p)?;
        covariates.set_column(&cfg.grid_column, grid_to_area_average(&grid, &areas)?)?;
    }
    areas.scale_coordinates(cfg.coordinate_scale);
    for name in &cfg.log_transform {
        let col = covariates
            .column(name)
            .ok_or_else(|| Error::Input(format!("log_transform names unknown covariate {name}")))?;
        let logged = log_transform_density(&col).map_err(|e| Error::Domain(format!("{name}: {e}")))?;
        covariates.set_column(name, logged)?;
    }

    let names = if cfg.covariates.is_empty() { covariates.names.clone() } else { cfg.covariates.clone() };
    let x = covariates.aligned(&areas, &names)?;
    let design = x
        .into_iter()
        .map(|row| std::iter::once(1.0).chain(row).collect())
        .collect();
    let observations = compute_log_rates(&cases, &areas)?
        .into_iter()
        .map(|r| Observation { area: r.area, week: r.week, theta: r.theta })
        .collect();
    Ok(Prepared { areas, cases, covariates, names, design, observations })
}
