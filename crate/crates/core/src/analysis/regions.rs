use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AreaTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalSeries {
    pub region_id: String,
    /// Population-weighted mean rate for weeks `1..=T`.
    pub phi: Vec<f64>,
}

/// Population-weighted regional averages of per-area rates. `rates` is
/// area × week on the rate scale. Regions come back sorted by id.
pub fn region_aggregate(rates: &[Vec<f64>], areas: &AreaTable) -> Result<Vec<RegionalSeries>> {
    if rates.len() != areas.len() || areas.is_empty() {
        return Err(Error::Input(format!("{} rate rows for {} areas", rates.len(), areas.len())));
    }
    let weeks = rates[0].len();
    if weeks == 0 || rates.iter().any(|r| r.len() != weeks) {
        return Err(Error::Input("rate rows must share a positive week count".into()));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, a) in areas.areas.iter().enumerate() {
        if a.region_id.is_empty() {
            return Err(Error::Input(format!("area {} has no region", a.area_id)));
        }
        groups.entry(a.region_id.as_str()).or_default().push(i);
    }
    groups
        .into_iter()
        .map(|(region, members)| {
            let total: f64 = members.iter().map(|&i| areas.areas[i].population as f64).sum();
            if !(total > 0.0) {
                return Err(Error::Input(format!("region {region} has no population")));
            }
            let phi = (0..weeks)
                .map(|t| members.iter().map(|&i| areas.areas[i].population as f64 * rates[i][t]).sum::<f64>() / total)
                .collect();
            Ok(RegionalSeries {
                region_id: region.to_string(),
                phi,
            })
        })
        .collect()
}
