use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis along which rates are z-scored before clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StandardizeAxis {
    /// Each week across areas.
    #[default]
    PerWeek,
    /// Each area across the weeks of the interval.
    PerArea,
}

impl FromStr for StandardizeAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-week" | "week" => Ok(Self::PerWeek),
            "per-area" | "area" => Ok(Self::PerArea),
            other => Err(Error::Parameter(format!("unknown standardization axis '{other}'"))),
        }
    }
}

fn zscore(values: &mut [f64], what: impl FnOnce() -> String) -> Result<()> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(var.sqrt() > 1e-12 * scale) || values.len() < 2 {
        return Err(Error::DegenerateVariance(what()));
    }
    let sd = var.sqrt();
    values.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    Ok(())
}

/// Area × week slice of `rates` (1-based inclusive `weeks`) z-scored along
/// `axis` with the sample SD.
pub fn standardize_interval(
    rates: &[Vec<f64>],
    weeks: RangeInclusive<usize>,
    axis: StandardizeAxis,
) -> Result<Vec<Vec<f64>>> {
    let total = rates.first().map_or(0, Vec::len);
    if rates.iter().any(|r| r.len() != total) {
        return Err(Error::Input("rate rows differ in length".into()));
    }
    let (a, b) = (*weeks.start(), *weeks.end());
    if a < 1 || b > total || a > b {
        return Err(Error::Range(format!("interval {a}..={b} outside weeks 1..={total}")));
    }
    let mut out: Vec<Vec<f64>> = rates.iter().map(|r| r[a - 1..b].to_vec()).collect();
    match axis {
        StandardizeAxis::PerWeek => {
            for c in 0..=(b - a) {
                let mut col: Vec<f64> = out.iter().map(|r| r[c]).collect();
                zscore(&mut col, || format!("week {} is constant across areas", a + c))?;
                out.iter_mut().zip(col).for_each(|(r, v)| r[c] = v);
            }
        }
        StandardizeAxis::PerArea => {
            for (i, row) in out.iter_mut().enumerate() {
                zscore(row, || format!("area row {i} is constant over the interval"))?;
            }
        }
    }
    Ok(out)
}

/// Consecutive intervals of `len` weeks tiling `1..=weeks`; the last one is
/// shorter when `len` does not divide `weeks`.
pub fn interval_tiling(weeks: usize, len: usize) -> Result<Vec<RangeInclusive<usize>>> {
    if len == 0 || weeks == 0 {
        return Err(Error::Parameter("interval length and week count must be positive".into()));
    }
    Ok((0..weeks.div_ceil(len)).map(|k| k * len + 1..=((k + 1) * len).min(weeks)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub wss: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, ctr) in centers.iter().enumerate() {
        let d = dist2(p, ctr);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Adds centres by D² sampling until there are `k`. When every point
/// already sits on a centre the lowest-index unused point is taken.
fn seed_plus_plus(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut chosen: Vec<usize> = Vec::new();
    if centers.is_empty() {
        let i = rng.random_range(0..points.len());
        chosen.push(i);
        centers.push(points[i].clone());
    }
    while centers.len() < k {
        let d: Vec<f64> = points.iter().map(|p| nearest(p, &centers).1).collect();
        let total: f64 = d.iter().sum();
        let i = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = d.iter().rposition(|&v| v > 0.0).unwrap_or(0);
            for (j, &v) in d.iter().enumerate() {
                if v > 0.0 && u < v {
                    pick = j;
                    break;
                }
                u -= v;
            }
            pick
        } else {
            (0..points.len()).find(|j| !chosen.contains(j)).unwrap_or(0)
        };
        chosen.push(i);
        centers.push(points[i].clone());
    }
    centers
}

/// Lloyd iterations to an assignment fixpoint. Empty clusters keep their
/// previous centre.
fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> KMeans {
    let dim = points[0].len();
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
    for _ in 0..1000 {
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for c in 0..centers.len() {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let wss = points.iter().zip(&labels).map(|(p, &l)| dist2(p, &centers[l])).sum();
    KMeans { labels, centers, wss }
}

fn check(points: &[Vec<f64>], k: usize) -> Result<()> {
    if k == 0 || k > points.len() {
        return Err(Error::Parameter(format!("k = {k} must lie in 1..={}", points.len())));
    }
    let dim = points[0].len();
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(Error::Input("points must share a positive dimension".into()));
    }
    Ok(())
}

fn best_of(runs: Vec<KMeans>) -> KMeans {
    // Strictly smaller WSS wins, so ties keep the earliest run.
    runs.into_iter().reduce(|a, b| if b.wss < a.wss { b } else { a }).expect("at least one run")
}

/// k-means++ seeding and Lloyd iterations, best of `restarts` by WSS.
/// Restart `r` draws from stream `r` of a ChaCha8 generator seeded with
/// `seed`.
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> Result<KMeans> {
    check(points, k)?;
    let runs: Vec<KMeans> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(points, seed_plus_plus(points, Vec::new(), k, &mut rng))
        })
        .collect();
    Ok(best_of(runs))
}

/// Best k-means fits for `k = 1..=k_max` (capped at the point count).
/// Each `k` also tries the previous solution plus one D²-seeded centre, which
/// keeps WSS non-increasing in `k`.
pub fn kmeans_path(points: &[Vec<f64>], k_max: usize, restarts: usize, seed: u64) -> Result<Vec<KMeans>> {
    check(points, 1)?;
    let mut path: Vec<KMeans> = Vec::new();
    for k in 1..=k_max.min(points.len()) {
        let mut best = kmeans(points, k, restarts, seed.wrapping_add(k as u64))?;
        if let Some(prev) = path.last() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::MAX - k as u64);
            let warm = lloyd(points, seed_plus_plus(points, prev.centers.clone(), k, &mut rng));
            if warm.wss < best.wss {
                best = warm;
            }
        }
        path.push(best);
    }
    Ok(path)
}

/// The `k` in `2..len` maximizing `wss[k-1] - 2 wss[k] + wss[k+1]` (with
/// `wss[0]` for `k = 1`); ties go to the smaller `k`.
pub fn elbow_select(wss: &[f64]) -> Result<usize> {
    if wss.len() < 3 {
        return Err(Error::Input(format!("elbow needs at least 3 WSS values, got {}", wss.len())));
    }
    let tol = 1e-9 * wss[0].abs().max(1.0);
    if let Some(k) = wss.windows(2).position(|w| w[1] > w[0] + tol) {
        return Err(Error::Input(format!("WSS increases from k = {} to k = {}", k + 1, k + 2)));
    }
    let mut best = (2, f64::NEG_INFINITY);
    for k in 2..wss.len() {
        let d2 = wss[k - 2] - 2.0 * wss[k - 1] + wss[k];
        if d2 > best.1 {
            best = (k, d2);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    High,
    Medium,
    Low,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::High => "high",
            Level::Medium => "medium",
            Level::Low => "low",
        })
    }
}

/// Level per point from a 3-cluster fit. Clusters are ranked by the mean of
/// their centre coordinates, equal means by cluster index.
pub fn label_levels(centers: &[Vec<f64>], labels: &[usize]) -> Result<Vec<Level>> {
    if centers.len() != 3 {
        return Err(Error::Parameter(format!("levels need k = 3, got {}", centers.len())));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= 3) {
        return Err(Error::Input(format!("label {l} has no centre")));
    }
    let mean = |c: &Vec<f64>| c.iter().sum::<f64>() / c.len().max(1) as f64;
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| mean(&centers[b]).total_cmp(&mean(&centers[a])).then(a.cmp(&b)));
    let mut level = [Level::Low; 3];
    for (rank, &c) in order.iter().enumerate() {
        level[c] = [Level::High, Level::Medium, Level::Low][rank];
    }
    Ok(labels.iter().map(|&l| level[l]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// 1-based interval index.
    pub interval: usize,
    pub first_week: usize,
    pub last_week: usize,
    /// WSS for `k = 1..`.
    pub wss: Vec<f64>,
    /// Elbow choice.
    pub chosen_k: usize,
    /// Level per area from the three-cluster fit.
    pub levels: Vec<Level>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterOptions {
    pub interval_weeks: usize,
    pub axis: StandardizeAxis,
    pub k_max: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            interval_weeks: 18,
            axis: StandardizeAxis::PerWeek,
            k_max: 10,
            restarts: 10,
            seed: 1,
        }
    }
}

/// Standardize, cluster and label each interval of an area × week rate
/// matrix. Levels always come from the `k = 3` fit; the elbow choice is
/// reported alongside.
pub fn cluster_intervals(rates: &[Vec<f64>], opts: &ClusterOptions) -> Result<Vec<ClusterResult>> {
    let weeks = rates.first().map_or(0, Vec::len);
    if rates.len() < 3 {
        return Err(Error::Input(format!("clustering needs at least 3 areas, got {}", rates.len())));
    }
    if opts.k_max < 3 {
        return Err(Error::Parameter(format!("k_max = {} leaves no three-cluster fit", opts.k_max)));
    }
    interval_tiling(weeks, opts.interval_weeks)?
        .into_iter()
        .enumerate()
        .map(|(i, range)| {
            let z = standardize_interval(rates, range.clone(), opts.axis)?;
            let seed = opts.seed.wrapping_add(1000 * i as u64);
            let path = kmeans_path(&z, opts.k_max, opts.restarts, seed)?;
            let wss: Vec<f64> = path.iter().map(|m| m.wss).collect();
            let chosen_k = if wss.len() >= 3 { elbow_select(&wss)? } else { wss.len() };
            let three = &path[2];
            Ok(ClusterResult {
                interval: i + 1,
                first_week: *range.start(),
                last_week: *range.end(),
                wss,
                chosen_k,
                levels: label_levels(&three.centers, &three.labels)?,
            })
        })
        .collect()
}

/// Adjusted Rand index between two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Input("labelings differ in length".into()));
    }
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |n: u64| (n * n.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = table.iter().flatten().map(|&n| c2(n)).sum();
    let sum_a: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let sum_b: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(a.len() as u64);
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if (max - expected).abs() < f64::EPSILON {
        return Ok(1.0);
    }
    Ok((sum_ij - expected) / (max - expected))
}
