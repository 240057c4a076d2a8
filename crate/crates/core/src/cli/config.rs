use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::ClusterOptions;
use crate::baselines::Kernel;
use crate::diagnostics::WeightScheme;
use crate::error::{Error, Result};
use crate::mesh_spde::MeshParams;
use crate::model::{OptimizerOptions, PriorSpec, SigmaConvention};
use crate::simulate::SynthScenario;

/// Input files; relative paths are taken from the config file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputFiles {
    pub areas: PathBuf,
    pub cases: PathBuf,
    pub covariates: Option<PathBuf>,
    /// GeoJSON polygons keyed by `area_id`.
    pub polygons: Option<PathBuf>,
    /// Gridded field averaged onto the areas.
    pub grid: Option<PathBuf>,
}

/// Summary used for the global Moran's I.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type")]
pub enum MoranSummary {
    /// Reported cases over all weeks divided by population.
    #[default]
    Cumulative,
    /// One week's rate, censored cells counted as zero cases.
    Week { week: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseOptions {
    pub weights: WeightScheme,
    pub moran_on: MoranSummary,
    pub permutations: usize,
    /// Ljung–Box lags; `min(10, T - 1)` when absent.
    pub lags: Option<usize>,
    pub correlation_threshold: f64,
    pub keep_priority: Vec<String>,
    pub seed: u64,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            weights: WeightScheme::default(),
            moran_on: MoranSummary::default(),
            permutations: 999,
            lags: None,
            correlation_threshold: 0.6,
            keep_priority: Vec::new(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GwrOptions {
    pub kernel: Kernel,
    /// Fixed bandwidth; chosen per week by cross-validation when absent.
    pub bandwidth: Option<f64>,
    /// Candidate bandwidths; a geometric grid over the data span when empty.
    pub grid: Vec<f64>,
}

impl Default for GwrOptions {
    fn default() -> Self {
        Self { kernel: Kernel::Gaussian, bandwidth: None, grid: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Holdout {
    /// Share of observed cells masked from the fit.
    pub fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: InputFiles,
    pub weeks: usize,
    /// Covariates entering the model, in order; every column when empty.
    pub covariates: Vec<String>,
    /// Columns replaced by their natural log before use.
    pub log_transform: Vec<String>,
    /// Name given to the area average of the gridded field.
    pub grid_column: String,
    /// Multiplies all coordinates (e.g. 0.001 for metres to km).
    pub coordinate_scale: f64,
    pub mesh: Option<MeshParams<f64>>,
    pub priors: PriorSpec,
    pub optimizer: OptimizerOptions,
    pub sigma_convention: SigmaConvention,
    pub n_samples: usize,
    pub seed: u64,
    /// Covariate increments for relative risks.
    pub increments: BTreeMap<String, f64>,
    pub diagnose: DiagnoseOptions,
    pub gwr: GwrOptions,
    pub holdout: Option<Holdout>,
    pub cluster: ClusterOptions,
    /// Posterior rates read by `cluster`, `regions` and `compare`;
    /// `<output_dir>/rates.csv` when absent.
    pub rates: Option<PathBuf>,
    pub simulate: SynthScenario,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            inputs: InputFiles::default(),
            weeks: 0,
            covariates: Vec::new(),
            log_transform: Vec::new(),
            grid_column: "grid".into(),
            coordinate_scale: 1.0,
            mesh: None,
            priors: PriorSpec::default(),
            optimizer: OptimizerOptions::default(),
            sigma_convention: SigmaConvention::Innovation,
            n_samples: 250,
            seed: 1,
            increments: BTreeMap::new(),
            diagnose: DiagnoseOptions::default(),
            gwr: GwrOptions::default(),
            holdout: None,
            cluster: ClusterOptions::default(),
            rates: None,
            simulate: SynthScenario::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.inputs.areas);
        resolve(base, &mut self.inputs.cases);
        for p in [&mut self.inputs.covariates, &mut self.inputs.polygons, &mut self.inputs.grid, &mut self.rates]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
        resolve(base, &mut self.output_dir);
    }

    pub fn rates_path(&self) -> PathBuf {
        self.rates.clone().unwrap_or_else(|| self.output_dir.join("rates.csv"))
    }

    /// Checks the fields the data commands need.
    pub fn validate_inputs(&self) -> Result<()> {
        if self.weeks == 0 {
            return Err(Error::Parameter("config must set weeks >= 1".into()));
        }
        if self.inputs.areas.as_os_str().is_empty() || self.inputs.cases.as_os_str().is_empty() {
            return Err(Error::Parameter("config must name the areas and cases files".into()));
        }
        if !(self.coordinate_scale > 0.0) || !self.coordinate_scale.is_finite() {
            return Err(Error::Parameter("coordinate_scale must be positive".into()));
        }
        if let Some(h) = self.holdout {
            if !(h.fraction > 0.0 && h.fraction < 1.0) {
                return Err(Error::Parameter(format!("holdout fraction {} outside (0, 1)", h.fraction)));
            }
        }
        Ok(())
    }
}
