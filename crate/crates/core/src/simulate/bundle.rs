use std::path::Path;

use crate::error::{Error, Result};
use crate::output::{csv_bytes, write_atomic};

use super::SynthDataset;

/// Writes `areas.csv`, `cases.csv`, `covariates.csv` and `truth.json` into
/// `dir` in the formats the ingest loaders read.
pub fn write_bundle(dir: &Path, synth: &SynthDataset) -> Result<()> {
    let areas = csv_bytes(
        &["area_id", "x", "y", "population", "region_id"],
        synth.areas.areas.iter().map(|a| {
            vec![a.area_id.clone(), a.x.to_string(), a.y.to_string(), a.population.to_string(), a.region_id.clone()]
        }),
    )?;
    write_atomic(&dir.join("areas.csv"), &areas)?;

    let ids = &synth.cases.area_ids;
    let cases = csv_bytes(
        &["area_id", "week", "cases"],
        synth.cases.rows.iter().map(|r| vec![ids[r.area].clone(), r.week.to_string(), r.cases.to_string()]),
    )?;
    write_atomic(&dir.join("cases.csv"), &cases)?;

    let cov = &synth.covariates;
    let header: Vec<&str> = std::iter::once("area_id").chain(cov.names.iter().map(String::as_str)).collect();
    let covs = csv_bytes(
        &header,
        cov.area_ids.iter().zip(&cov.values).map(|(id, row)| {
            std::iter::once(id.clone()).chain(row.iter().map(f64::to_string)).collect::<Vec<_>>()
        }),
    )?;
    write_atomic(&dir.join("covariates.csv"), &covs)?;

    let truth = serde_json::to_vec_pretty(&synth.truth).map_err(|e| Error::format("truth.json", e.to_string()))?;
    write_atomic(&dir.join("truth.json"), &truth)
}
