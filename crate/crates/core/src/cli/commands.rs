use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{cluster_intervals, region_aggregate, rmse_mae_aligned, Accuracy, ClusterResult};
use crate::baselines::{gwr_by_week, gwr_by_week_predict, ols_pooled};
use crate::diagnostics::{build_spatial_weights, ljung_box, morans_i, screen_covariates, DroppedVariable, LjungBox};
use crate::error::{Error, Result};
use crate::mesh_spde::MeshParams;
use crate::model::{fit, relative_risks, FitOptions, FitResult, Hyper, HyperRow, Observation, RelativeRisk};
use crate::output::{csv_bytes, write_atomic};
use crate::simulate::{make_synth_dataset, write_bundle};

use super::config::{InputFiles, MoranSummary, PipelineConfig};
use super::prepare::{prepare, Prepared};

fn json_bytes<T: Serialize>(value: &T, what: &str) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| Error::format(what, e))?;
    v.push(b'\n');
    Ok(v)
}

fn fmt(v: f64) -> String {
    v.to_string()
}

#[derive(Serialize)]
struct IngestSummary {
    n_areas: usize,
    weeks: usize,
    observed_per_week: Vec<usize>,
    censored_cells: usize,
    covariates: Vec<String>,
}

pub fn run_ingest(cfg: &PipelineConfig) -> Result<()> {
    let p = prepare(cfg)?;
    let summary = IngestSummary {
        n_areas: p.areas.len(),
        weeks: cfg.weeks,
        observed_per_week: p.cases.counts_per_week(),
        censored_cells: p.areas.len() * cfg.weeks - p.observations.len(),
        covariates: p.names.clone(),
    };
    write_atomic(&cfg.output_dir.join("ingest.json"), &json_bytes(&summary, "ingest.json")?)?;
    let ids = &p.areas.areas;
    let rows = p.observations.iter().map(|o| vec![ids[o.area].area_id.clone(), o.week.to_string(), fmt(o.theta)]);
    write_atomic(&cfg.output_dir.join("log_rates.csv"), &csv_bytes(&["area_id", "week", "theta"], rows)?)?;
    let header: Vec<&str> = std::iter::once("area_id").chain(p.names.iter().map(String::as_str)).collect();
    let rows = ids
        .iter()
        .zip(&p.design)
        .map(|(a, r)| std::iter::once(a.area_id.clone()).chain(r[1..].iter().map(|&v| fmt(v))).collect::<Vec<_>>());
    write_atomic(&cfg.output_dir.join("design.csv"), &csv_bytes(&header, rows)?)
}

#[derive(Serialize)]
struct MoranReport {
    #[serde(rename = "I")]
    i: f64,
    p: f64,
    expected: f64,
    p_normal: f64,
    summary: MoranSummary,
}

#[derive(Serialize)]
struct DiagnoseReport {
    morans: MoranReport,
    ljung_box: LjungBox,
    lags: usize,
    names: Vec<String>,
    correlations: Vec<Vec<f64>>,
    retained: Vec<String>,
    vif: Vec<f64>,
    dropped: Vec<DroppedVariable>,
}

pub fn run_diagnose(cfg: &PipelineConfig) -> Result<()> {
    let p = prepare(cfg)?;
    let opts = &cfg.diagnose;
    let n = p.areas.len();
    let mut cases = vec![vec![0.0; cfg.weeks]; n];
    for r in &p.cases.rows {
        let id = &p.cases.area_ids[r.area];
        let a = p.areas.position(id).ok_or_else(|| Error::Join(format!("case row references unknown area {id}")))?;
        cases[a][r.week - 1] = r.cases as f64;
    }
    let pop: Vec<f64> = p.areas.areas.iter().map(|a| a.population as f64).collect();
    let values: Vec<f64> = match opts.moran_on {
        MoranSummary::Cumulative => (0..n).map(|i| cases[i].iter().sum::<f64>() / pop[i]).collect(),
        MoranSummary::Week { week } => {
            if week == 0 || week > cfg.weeks {
                return Err(Error::Range(format!("Moran week {week} outside 1..{}", cfg.weeks)));
            }
            (0..n).map(|i| cases[i][week - 1] / pop[i]).collect()
        }
    };
    let w = build_spatial_weights(&p.areas, opts.weights)?;
    let m = morans_i(&values, &w, opts.permutations, opts.seed)?;
    let total: f64 = pop.iter().sum();
    let series: Vec<f64> = (0..cfg.weeks).map(|t| cases.iter().map(|c| c[t]).sum::<f64>() / total).collect();
    let lags = opts.lags.unwrap_or_else(|| 10.min(cfg.weeks.saturating_sub(1)));
    let lb = ljung_box(&series, lags)?;
    let screen = screen_covariates(&p.columns(), &p.names, opts.correlation_threshold, &opts.keep_priority)?;
    let report = DiagnoseReport {
        morans: MoranReport { i: m.i, p: m.p, expected: m.expected, p_normal: m.p_normal, summary: opts.moran_on },
        ljung_box: lb,
        lags,
        names: screen.names,
        correlations: screen.correlations,
        retained: screen.retained,
        vif: screen.vif,
        dropped: screen.dropped,
    };
    write_atomic(&cfg.output_dir.join("diagnostics.json"), &json_bytes(&report, "diagnostics.json")?)
}

fn fit_options(cfg: &PipelineConfig) -> FitOptions {
    FitOptions {
        priors: cfg.priors,
        optimizer: cfg.optimizer,
        sigma_convention: cfg.sigma_convention,
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        init: None,
    }
}

fn span(points: &[[f64; 2]]) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
}

fn fit_prepared(cfg: &PipelineConfig, p: &Prepared, observations: Vec<Observation>) -> Result<(FitResult, crate::mesh_spde::Mesh<f64>)> {
    let (data, mesh) = p.dataset(cfg, observations)?;
    let result = fit(&data, span(&p.locations()), &fit_options(cfg))?;
    Ok((result, mesh))
}

#[derive(Serialize)]
struct CoefRow {
    name: String,
    mean: f64,
    sd: f64,
    #[serde(rename = "0.025quant")]
    q025: f64,
    #[serde(rename = "0.975quant")]
    q975: f64,
    significant: bool,
}

#[derive(Serialize)]
struct FitReport {
    sigma_convention: crate::model::SigmaConvention,
    mesh_nodes: usize,
    mesh_params: MeshParams<f64>,
    n_observations: usize,
    hyperparameters: Vec<HyperRow>,
    mode: Hyper,
    log_posterior: f64,
    evaluations: usize,
    converged: bool,
    warnings: Vec<String>,
    coefficients: Vec<CoefRow>,
    relative_risks: Vec<RelativeRisk>,
}

pub fn run_fit(cfg: &PipelineConfig) -> Result<()> {
    let p = prepare(cfg)?;
    let (res, mesh) = fit_prepared(cfg, &p, p.observations.clone())?;
    let rr = if cfg.increments.is_empty() {
        Vec::new()
    } else {
        let deltas: Vec<(String, f64)> = cfg.increments.iter().map(|(k, v)| (k.clone(), *v)).collect();
        relative_risks(&res.latent.coefficients, &deltas)?
    };
    let report = FitReport {
        sigma_convention: cfg.sigma_convention,
        mesh_nodes: mesh.n_nodes(),
        mesh_params: p.mesh_params(cfg),
        n_observations: p.observations.len(),
        hyperparameters: res.hyper.rows.clone(),
        mode: res.hyper.mode,
        log_posterior: res.hyper.log_posterior,
        evaluations: res.hyper.evaluations,
        converged: res.hyper.converged,
        warnings: res.hyper.warnings.clone(),
        coefficients: res
            .latent
            .coefficients
            .iter()
            .map(|c| CoefRow {
                name: c.name.clone(),
                mean: c.mean,
                sd: c.sd,
                q025: c.lo95,
                q975: c.hi95,
                significant: c.significant,
            })
            .collect(),
        relative_risks: rr,
    };
    let out = &cfg.output_dir;
    write_atomic(&out.join("fit.json"), &json_bytes(&report, "fit.json")?)?;
    let ids = &p.areas.areas;
    let rows = res.latent.predictions.iter().map(|c| {
        vec![
            ids[c.area].area_id.clone(),
            c.week.to_string(),
            fmt(c.theta_hat),
            fmt(c.rate),
            fmt(c.rate_lo95),
            fmt(c.rate_hi95),
            c.censored.to_string(),
        ]
    });
    let header = ["area_id", "week", "theta_hat", "rate", "lo95", "hi95", "censored"];
    write_atomic(&out.join("rates.csv"), &csv_bytes(&header, rows)?)?;
    let mut mesh_json = mesh.to_json()?.into_bytes();
    mesh_json.push(b'\n');
    write_atomic(&out.join("mesh.json"), &mesh_json)
}

#[derive(Deserialize)]
struct RateRow {
    area_id: String,
    week: usize,
    theta_hat: f64,
    rate: f64,
}

/// Reads `rates.csv` into area × week matrices of `theta_hat` and `rate`.
fn read_rates(path: &Path, p: &Prepared, weeks: usize) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut rdr = csv::Reader::from_reader(file);
    let n = p.areas.len();
    let mut theta = vec![vec![f64::NAN; weeks]; n];
    let mut rate = vec![vec![f64::NAN; weeks]; n];
    for rec in rdr.deserialize() {
        let r: RateRow = rec.map_err(|e| Error::format(path.display().to_string(), e))?;
        let a = p
            .areas
            .position(&r.area_id)
            .ok_or_else(|| Error::Join(format!("{}: unknown area {}", path.display(), r.area_id)))?;
        if r.week == 0 || r.week > weeks {
            return Err(Error::Range(format!("{}: week {} outside 1..{weeks}", path.display(), r.week)));
        }
        theta[a][r.week - 1] = r.theta_hat;
        rate[a][r.week - 1] = r.rate;
    }
    if theta.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Input(format!("{} does not cover every area and week", path.display())));
    }
    Ok((theta, rate))
}

fn bandwidth_grid(cfg: &PipelineConfig, p: &Prepared) -> Vec<f64> {
    if !cfg.gwr.grid.is_empty() {
        return cfg.gwr.grid.clone();
    }
    let s = span(&p.locations()).max(f64::MIN_POSITIVE);
    (0..20).map(|k| s * 0.02 * 50f64.powf(k as f64 / 19.0)).collect()
}

pub fn run_compare(cfg: &PipelineConfig, fit_now: bool) -> Result<()> {
    let p = prepare(cfg)?;
    let locs = p.locations();
    let grid = bandwidth_grid(cfg, &p);
    let (test, bayes, ols, gwr): (Vec<Observation>, Vec<f64>, Vec<f64>, Vec<f64>) = match cfg.holdout {
        Some(h) => {
            let mut order: Vec<usize> = (0..p.observations.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(h.seed));
            let k = ((h.fraction * order.len() as f64).round() as usize).clamp(1, order.len() - 1);
            let mut held = vec![false; order.len()];
            for &i in &order[..k] {
                held[i] = true;
            }
            let (train, test): (Vec<Observation>, Vec<Observation>) = {
                let (a, b): (Vec<_>, Vec<_>) = p.observations.iter().cloned().enumerate().partition(|(i, _)| !held[*i]);
                (a.into_iter().map(|x| x.1).collect(), b.into_iter().map(|x| x.1).collect())
            };
            let (res, _) = fit_prepared(cfg, &p, train.clone())?;
            let bayes = test
                .iter()
                .map(|o| res.latent.prediction(o.area, o.week).map(|c| c.theta_hat).ok_or_else(|| {
                    Error::Input(format!("no prediction for area {} week {}", o.area, o.week))
                }))
                .collect::<Result<Vec<_>>>()?;
            let beta = ols_pooled(&p.design, &train)?.beta;
            let ols = test.iter().map(|o| p.design[o.area].iter().zip(&beta).map(|(a, b)| a * b).sum()).collect();
            let gwr = gwr_by_week_predict(&locs, &p.design, &train, &test, cfg.weeks, cfg.gwr.bandwidth, &grid, cfg.gwr.kernel)?;
            (test, bayes, ols, gwr)
        }
        None => {
            let obs = p.observations.clone();
            let bayes = if fit_now {
                let (res, _) = fit_prepared(cfg, &p, obs.clone())?;
                obs.iter()
                    .map(|o| res.latent.prediction(o.area, o.week).map_or(f64::NAN, |c| c.theta_hat))
                    .collect()
            } else {
                let (theta, _) = read_rates(&cfg.rates_path(), &p, cfg.weeks)?;
                obs.iter().map(|o| theta[o.area][o.week - 1]).collect()
            };
            let ols = ols_pooled(&p.design, &obs)?.fitted;
            let gwr = gwr_by_week(&locs, &p.design, &obs, cfg.weeks, cfg.gwr.bandwidth, &grid, cfg.gwr.kernel)?.fitted;
            (obs, bayes, ols, gwr)
        }
    };
    let y: Vec<f64> = test.iter().map(|o| o.theta).collect();
    let rows: Vec<(&str, Accuracy)> = vec![
        ("bayesian", rmse_mae_aligned(&bayes, &y)?),
        ("ols", rmse_mae_aligned(&ols, &y)?),
        ("gwr", rmse_mae_aligned(&gwr, &y)?),
    ];
    let body = csv_bytes(
        &["model", "rmse", "mae"],
        rows.iter().map(|(m, a)| vec![m.to_string(), fmt(a.rmse), fmt(a.mae)]),
    )?;
    write_atomic(&cfg.output_dir.join("comparison.csv"), &body)
}

#[derive(Serialize)]
struct ClusterSummary<'a> {
    interval: usize,
    first_week: usize,
    last_week: usize,
    wss: &'a [f64],
    chosen_k: usize,
}

pub fn run_cluster(cfg: &PipelineConfig) -> Result<()> {
    let p = prepare(cfg)?;
    let (_, rate) = read_rates(&cfg.rates_path(), &p, cfg.weeks)?;
    let results: Vec<ClusterResult> = cluster_intervals(&rate, &cfg.cluster)?;
    let ids = &p.areas.areas;
    let mut rows = Vec::new();
    for r in &results {
        for (a, level) in ids.iter().zip(&r.levels) {
            rows.push(vec![r.interval.to_string(), a.area_id.clone(), level.to_string()]);
        }
    }
    write_atomic(&cfg.output_dir.join("clusters.csv"), &csv_bytes(&["interval", "area_id", "level"], rows)?)?;
    let summary: Vec<ClusterSummary> = results
        .iter()
        .map(|r| ClusterSummary {
            interval: r.interval,
            first_week: r.first_week,
            last_week: r.last_week,
            wss: &r.wss,
            chosen_k: r.chosen_k,
        })
        .collect();
    write_atomic(&cfg.output_dir.join("clusters.json"), &json_bytes(&summary, "clusters.json")?)
}

pub fn run_regions(cfg: &PipelineConfig) -> Result<()> {
    let p = prepare(cfg)?;
    let (_, rate) = read_rates(&cfg.rates_path(), &p, cfg.weeks)?;
    let series = region_aggregate(&rate, &p.areas)?;
    let mut rows = Vec::new();
    for s in &series {
        for (t, v) in s.phi.iter().enumerate() {
            rows.push(vec![s.region_id.clone(), (t + 1).to_string(), fmt(*v)]);
        }
    }
    write_atomic(&cfg.output_dir.join("regions.csv"), &csv_bytes(&["region_id", "week", "phi"], rows)?)
}

/// Writes a synthetic bundle and a config that fits it.
pub fn run_simulate(cfg: &PipelineConfig) -> Result<()> {
    let s = &cfg.simulate;
    let synth = make_synth_dataset(s)?;
    let out = &cfg.output_dir;
    write_bundle(out, &synth)?;
    let locs = synth.areas.centroids();
    let mesh = s.mesh.unwrap_or_else(|| MeshParams::from_data(&locs, s.hyper.rho));
    let fit_cfg = PipelineConfig {
        inputs: InputFiles {
            areas: "areas.csv".into(),
            cases: "cases.csv".into(),
            covariates: Some("covariates.csv".into()),
            polygons: None,
            grid: None,
        },
        weeks: s.weeks,
        covariates: s.covariate_names(),
        mesh: Some(mesh),
        sigma_convention: s.sigma_convention,
        seed: cfg.seed,
        simulate: s.clone(),
        output_dir: "fit".into(),
        ..PipelineConfig::default()
    };
    write_atomic(&out.join("config.json"), &json_bytes(&fit_cfg, "config.json")?)
}
