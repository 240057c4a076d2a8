use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::baselines::least_squares;
use crate::error::{Error, Result};

use super::weights::SpatialWeights;

fn centered(values: &[f64], what: &str) -> Result<(Vec<f64>, f64)> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let z: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let ss: f64 = z.iter().map(|v| v * v).sum();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if !(ss > (1e-14 * scale).powi(2) * n) {
        return Err(Error::DegenerateVariance(format!("{what} is constant")));
    }
    Ok((z, ss))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoranResult {
    #[serde(rename = "I")]
    pub i: f64,
    /// One-sided permutation p-value for positive autocorrelation.
    pub p: f64,
    /// `-1/(n-1)`.
    pub expected: f64,
    pub permutation_mean: f64,
    pub permutation_sd: f64,
    /// One-sided p-value from the normal approximation under normality.
    pub p_normal: f64,
}

fn moran_stat(z: &[f64], ss: f64, w: &SpatialWeights, s0: f64) -> f64 {
    let n = z.len() as f64;
    let cross: f64 = w
        .neighbours
        .iter()
        .enumerate()
        .map(|(i, nb)| z[i] * nb.iter().map(|&j| z[j]).sum::<f64>())
        .sum();
    n / s0 * cross / ss
}

/// Global Moran's I with a permutation test (`n_perm` shuffles, seeded).
pub fn morans_i(values: &[f64], w: &SpatialWeights, n_perm: usize, seed: u64) -> Result<MoranResult> {
    let n = values.len();
    if n != w.len() || n < 3 {
        return Err(Error::Input(format!("{n} values for {} weight rows", w.len())));
    }
    let (z, ss) = centered(values, "Moran's I input")?;
    let s0 = w.s0();
    if !(s0 > 0.0) {
        return Err(Error::Input("spatial weights have no links".into()));
    }
    let stat = moran_stat(&z, ss, w, s0);
    let perms: Vec<f64> = (0..n_perm)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut zp = z.clone();
            zp.shuffle(&mut rng);
            moran_stat(&zp, ss, w, s0)
        })
        .collect();
    let count = perms.iter().filter(|&&v| v >= stat).count();
    let pm = perms.iter().sum::<f64>() / n_perm.max(1) as f64;
    let psd = if n_perm > 1 {
        (perms.iter().map(|v| (v - pm).powi(2)).sum::<f64>() / (n_perm - 1) as f64).sqrt()
    } else {
        f64::NAN
    };
    // Moments under the normality assumption.
    let nf = n as f64;
    let expected = -1.0 / (nf - 1.0);
    let s1 = 2.0 * s0;
    let s2: f64 = w.neighbours.iter().map(|nb| (2.0 * nb.len() as f64).powi(2)).sum();
    let var = (nf * nf * s1 - nf * s2 + 3.0 * s0 * s0) / (s0 * s0 * (nf * nf - 1.0)) - expected * expected;
    let p_normal = if var > 0.0 {
        1.0 - Normal::standard().cdf((stat - expected) / var.sqrt())
    } else {
        f64::NAN
    };
    Ok(MoranResult {
        i: stat,
        p: (count + 1) as f64 / (n_perm + 1) as f64,
        expected,
        permutation_mean: pm,
        permutation_sd: psd,
        p_normal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LjungBox {
    #[serde(rename = "Q")]
    pub q: f64,
    pub p: f64,
}

/// Sample autocorrelation at lag `k`.
pub fn autocorrelation(series: &[f64], k: usize) -> Result<f64> {
    let (z, ss) = centered(series, "series")?;
    Ok(z[k..].iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() / ss)
}

/// Ljung–Box portmanteau test over lags `1..=h`.
pub fn ljung_box(series: &[f64], h: usize) -> Result<LjungBox> {
    let t = series.len();
    if h == 0 || t <= h {
        return Err(Error::Parameter(format!("need 1 <= h < T, got h = {h}, T = {t}")));
    }
    let (z, ss) = centered(series, "series")?;
    let tf = t as f64;
    let q = tf * (tf + 2.0)
        * (1..=h)
            .map(|k| {
                let r = z[k..].iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() / ss;
                r * r / (tf - k as f64)
            })
            .sum::<f64>();
    let chi = ChiSquared::new(h as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(LjungBox { q, p: chi.sf(q) })
}

/// Pearson correlations between columns.
pub fn pearson_matrix(columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let p = columns.len();
    let n = columns.first().map_or(0, Vec::len);
    if columns.iter().any(|c| c.len() != n) || n < 2 {
        return Err(Error::Input("columns must share a length of at least 2".into()));
    }
    let cs = columns
        .iter()
        .enumerate()
        .map(|(j, c)| centered(c, &format!("column {j}")))
        .collect::<Result<Vec<_>>>()?;
    let mut r = vec![vec![0.0; p]; p];
    for i in 0..p {
        r[i][i] = 1.0;
        for j in (i + 1)..p {
            let cross: f64 = cs[i].0.iter().zip(&cs[j].0).map(|(a, b)| a * b).sum();
            let v = (cross / (cs[i].1 * cs[j].1).sqrt()).clamp(-1.0, 1.0);
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    Ok(r)
}

/// `1/(1-R²)` of each column regressed on the others plus an intercept.
pub fn vif(columns: &[Vec<f64>], names: &[String]) -> Result<Vec<f64>> {
    let p = columns.len();
    let n = columns.first().map_or(0, Vec::len);
    if names.len() != p || columns.iter().any(|c| c.len() != n) {
        return Err(Error::Input("columns and names disagree".into()));
    }
    if n <= p {
        return Err(Error::Singular(format!("{n} rows for {p} columns")));
    }
    (0..p)
        .map(|j| {
            let (_, tss) = centered(&columns[j], &names[j])?;
            let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
            let x = DMatrix::from_fn(n, others.len() + 1, |i, c| if c == 0 { 1.0 } else { columns[others[c - 1]][i] });
            let y = DVector::from_column_slice(&columns[j]);
            let singular = || Error::Singular(format!("column {} is collinear with the others", names[j]));
            let beta = least_squares(&x, &y).map_err(|_| singular())?;
            let resid = &y - &x * &beta;
            let rss = resid.norm_squared();
            let r2 = 1.0 - rss / tss;
            if !(r2 < 1.0 - 1e-12) {
                return Err(singular());
            }
            Ok(1.0 / (1.0 - r2))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedVariable {
    pub name: String,
    pub partner: String,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub names: Vec<String>,
    pub correlations: Vec<Vec<f64>>,
    pub retained: Vec<String>,
    pub vif: Vec<f64>,
    pub dropped: Vec<DroppedVariable>,
}

/// Repeatedly removes one variable from the most correlated surviving pair
/// with `|r| >= threshold`: the one later in `keep_priority`, where unlisted
/// names rank after listed ones and among themselves by column order.
pub fn screen_covariates(
    columns: &[Vec<f64>],
    names: &[String],
    threshold: f64,
    keep_priority: &[String],
) -> Result<ScreeningReport> {
    if names.len() != columns.len() {
        return Err(Error::Input("columns and names disagree".into()));
    }
    let r = pearson_matrix(columns)?;
    let p = names.len();
    let rank = |j: usize| match keep_priority.iter().position(|n| *n == names[j]) {
        Some(k) => k,
        None => keep_priority.len() + j,
    };
    let mut alive = vec![true; p];
    let mut dropped = Vec::new();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..p {
            for j in (i + 1)..p {
                if alive[i] && alive[j] && r[i][j].abs() >= threshold && best.is_none_or(|(v, _, _)| r[i][j].abs() > v) {
                    best = Some((r[i][j].abs(), i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        let (drop, keep) = if rank(i) > rank(j) { (i, j) } else { (j, i) };
        alive[drop] = false;
        dropped.push(DroppedVariable {
            name: names[drop].clone(),
            partner: names[keep].clone(),
            r: r[i][j],
        });
    }
    let kept: Vec<usize> = (0..p).filter(|&j| alive[j]).collect();
    let retained: Vec<String> = kept.iter().map(|&j| names[j].clone()).collect();
    let cols: Vec<Vec<f64>> = kept.iter().map(|&j| columns[j].clone()).collect();
    let vif = vif(&cols, &retained)?;
    Ok(ScreeningReport {
        names: names.to_vec(),
        correlations: r,
        retained,
        vif,
        dropped,
    })
}
