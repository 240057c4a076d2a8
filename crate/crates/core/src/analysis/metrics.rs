use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Observation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub rmse: f64,
    pub mae: f64,
    /// Matched rows used.
    pub n: usize,
}

/// RMSE and MAE over the `(area, week)` cells present in both tables.
pub fn rmse_mae(pred: &[Observation], obs: &[Observation]) -> Result<Accuracy> {
    let lookup: HashMap<(usize, usize), f64> = pred.iter().map(|o| ((o.area, o.week), o.theta)).collect();
    let (mut sq, mut abs, mut n) = (0.0, 0.0, 0usize);
    for o in obs {
        if let Some(p) = lookup.get(&(o.area, o.week)) {
            let e = p - o.theta;
            sq += e * e;
            abs += e.abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Input("predictions and observations share no cells".into()));
    }
    Ok(Accuracy {
        rmse: (sq / n as f64).sqrt(),
        mae: abs / n as f64,
        n,
    })
}

/// Convenience form for aligned slices.
pub fn rmse_mae_aligned(pred: &[f64], obs: &[f64]) -> Result<Accuracy> {
    if pred.len() != obs.len() || pred.is_empty() {
        return Err(Error::Input(format!("{} predictions for {} observations", pred.len(), obs.len())));
    }
    let n = pred.len() as f64;
    let sq: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o).powi(2)).sum();
    let abs: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o).abs()).sum();
    Ok(Accuracy {
        rmse: (sq / n).sqrt(),
        mae: abs / n,
        n: pred.len(),
    })
}
