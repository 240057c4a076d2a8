use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::hyper::{component_from_internal, Hyper, HYPER_NAMES};
use super::posterior::LatentModel;

const Z975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    /// Maximum number of objective evaluations for the simplex search.
    pub max_evals: usize,
    /// Relative tolerance on the spread of simplex values.
    pub f_tol: f64,
    /// Tolerance on the simplex diameter in internal coordinates.
    pub x_tol: f64,
    /// Initial simplex step in internal coordinates.
    pub step: f64,
    /// Finite-difference step for the Hessian.
    pub hessian_step: f64,
    /// Replace the Gaussian summaries by a 3-point-per-axis quadrature.
    pub grid_integration: bool,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_evals: 400,
            f_tol: 1e-8,
            x_tol: 1e-4,
            step: 0.5,
            hessian_step: 0.02,
            grid_integration: false,
        }
    }
}

/// Posterior summary of one hyperparameter, column names as in the usual
/// INLA-style table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperRow {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    #[serde(rename = "0.025quant")]
    pub q025: f64,
    #[serde(rename = "0.975quant")]
    pub q975: f64,
    pub mode: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperFit {
    pub mode: Hyper,
    /// Covariance of the internal parameters at the mode.
    pub covariance: Vec<Vec<f64>>,
    pub rows: Vec<HyperRow>,
    /// Objective (log posterior of the natural parameters) at the mode.
    pub log_posterior: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl HyperFit {
    pub fn row(&self, name: &str) -> Option<&HyperRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

struct Objective<'m, 'a> {
    model: &'m LatentModel<'a>,
    evals: usize,
}

impl Objective<'_, '_> {
    /// Negated internal objective; failures map to +∞ so the simplex
    /// retreats from them.
    fn eval(&mut self, z: &[f64; 4]) -> f64 {
        self.evals += 1;
        match self.model.internal_objective(z) {
            Ok(v) if v.is_finite() => -v,
            _ => f64::INFINITY,
        }
    }

    fn eval_many(&mut self, zs: &[[f64; 4]]) -> Vec<f64> {
        self.evals += zs.len();
        zs.par_iter()
            .map(|z| match self.model.internal_objective(z) {
                Ok(v) if v.is_finite() => -v,
                _ => f64::INFINITY,
            })
            .collect()
    }
}

fn lerp(a: &[f64; 4], b: &[f64; 4], t: f64) -> [f64; 4] {
    std::array::from_fn(|i| a[i] + t * (b[i] - a[i]))
}

/// Nelder–Mead minimization from a fixed axis-aligned simplex. Returns the
/// best vertex, its value and whether the tolerances were met.
fn nelder_mead(
    obj: &mut Objective<'_, '_>,
    x0: [f64; 4],
    opts: &OptimizerOptions,
    budget: usize,
) -> ([f64; 4], f64, bool) {
    let start = obj.evals;
    let mut simplex: Vec<[f64; 4]> = vec![x0];
    for i in 0..4 {
        let mut v = x0;
        v[i] += opts.step;
        simplex.push(v);
    }
    let mut values = obj.eval_many(&simplex);
    loop {
        let mut idx: Vec<usize> = (0..5).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = idx.iter().map(|&i| simplex[i]).collect();
        values = idx.iter().map(|&i| values[i]).collect();
        let (best, worst) = (values[0], values[4]);
        let spread = worst - best;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if best.is_finite() && spread <= opts.f_tol * best.abs().max(1.0) && diameter <= opts.x_tol {
            return (simplex[0], best, true);
        }
        if obj.evals - start >= budget {
            return (simplex[0], best, false);
        }
        let centroid: [f64; 4] =
            std::array::from_fn(|i| simplex[..4].iter().map(|v| v[i]).sum::<f64>() / 4.0);
        let reflected = lerp(&centroid, &simplex[4], -1.0);
        let fr = obj.eval(&reflected);
        if fr < values[0] {
            let expanded = lerp(&centroid, &simplex[4], -2.0);
            let fe = obj.eval(&expanded);
            if fe < fr {
                simplex[4] = expanded;
                values[4] = fe;
            } else {
                simplex[4] = reflected;
                values[4] = fr;
            }
            continue;
        }
        if fr < values[3] {
            simplex[4] = reflected;
            values[4] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[4] {
            let c = lerp(&centroid, &simplex[4], -0.5);
            let f = obj.eval(&c);
            (c, f)
        } else {
            let c = lerp(&centroid, &simplex[4], 0.5);
            let f = obj.eval(&c);
            (c, f)
        };
        if fc < values[4].min(fr) {
            simplex[4] = contracted;
            values[4] = fc;
            continue;
        }
        let shrunk: Vec<[f64; 4]> = simplex[1..].iter().map(|v| lerp(&simplex[0], v, 0.5)).collect();
        let fs = obj.eval_many(&shrunk);
        for (k, (v, f)) in shrunk.into_iter().zip(fs).enumerate() {
            simplex[k + 1] = v;
            values[k + 1] = f;
        }
    }
}

/// Central-difference Hessian of the (positive) internal objective.
fn hessian(obj: &mut Objective<'_, '_>, z: &[f64; 4], f0: f64, h: f64) -> Result<DMatrix<f64>> {
    let mut points = Vec::new();
    for i in 0..4 {
        for s in [1.0, -1.0] {
            let mut p = *z;
            p[i] += s * h;
            points.push(p);
        }
    }
    for i in 0..4 {
        for j in (i + 1)..4 {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut p = *z;
                p[i] += si * h;
                p[j] += sj * h;
                points.push(p);
            }
        }
    }
    let vals: Vec<f64> = obj.eval_many(&points).into_iter().map(|v| -v).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "objective not finite near the mode {}",
            Hyper::from_internal(z)
        )));
    }
    let mut hm = DMatrix::zeros(4, 4);
    for i in 0..4 {
        hm[(i, i)] = (vals[2 * i] - 2.0 * f0 + vals[2 * i + 1]) / (h * h);
    }
    let mut k = 8;
    for i in 0..4 {
        for j in (i + 1)..4 {
            let v = (vals[k] - vals[k + 1] - vals[k + 2] + vals[k + 3]) / (4.0 * h * h);
            hm[(i, j)] = v;
            hm[(j, i)] = v;
            k += 4;
        }
    }
    Ok(hm)
}

/// `(-H)⁻¹`, with eigenvalues of `-H` clamped when it is not positive definite.
fn covariance_from_hessian(h: &DMatrix<f64>, warnings: &mut Vec<String>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(-h.clone());
    let max = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let floor = if max > 0.0 { max * 1e-8 } else { 1.0 };
    let mut lam = eig.eigenvalues.clone();
    if lam.iter().any(|&l| !(l > floor)) {
        warnings.push("negative Hessian at the mode is not positive definite; eigenvalues clamped".into());
        for l in lam.iter_mut() {
            *l = l.max(floor);
        }
    }
    let inv = DMatrix::from_diagonal(&lam.map(|l| 1.0 / l));
    &eig.eigenvectors * inv * eig.eigenvectors.transpose()
}

/// Mean and SD of `g(Z)` for `Z ~ N(mu, s²)`, by the trapezoid rule on ±8 SD.
fn transformed_moments(i: usize, mu: f64, s: f64) -> (f64, f64) {
    let n = 801;
    let (mut w, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let x = -8.0 + 16.0 * k as f64 / (n - 1) as f64;
        let d = (-0.5 * x * x).exp() * if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let g = component_from_internal(i, mu + s * x);
        w += d;
        m1 += d * g;
        m2 += d * g * g;
    }
    let mean = m1 / w;
    (mean, (m2 / w - mean * mean).max(0.0).sqrt())
}

fn gaussian_rows(mode: &Hyper, z: &[f64; 4], cov: &DMatrix<f64>) -> Vec<HyperRow> {
    let natural = mode.as_array();
    (0..4)
        .map(|i| {
            let s = cov[(i, i)].max(0.0).sqrt();
            let (mean, sd) = transformed_moments(i, z[i], s);
            HyperRow {
                name: HYPER_NAMES[i].to_string(),
                mean,
                sd,
                q025: component_from_internal(i, z[i] - Z975 * s),
                q975: component_from_internal(i, z[i] + Z975 * s),
                mode: natural[i],
            }
        })
        .collect()
}

/// Three-point-per-axis integration over the hyperparameter posterior in
/// the eigenbasis of the Gaussian approximation. Means and SDs are weighted
/// sums; quantiles come from a Gaussian matched to the weighted moments in
/// internal coordinates.
fn grid_rows(
    obj: &mut Objective<'_, '_>,
    mode: &Hyper,
    z: &[f64; 4],
    f0: f64,
    cov: &DMatrix<f64>,
) -> Vec<HyperRow> {
    let eig = SymmetricEigen::new(cov.clone());
    let axis = eig.eigenvectors.clone() * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    let nodes = [0.0, 3f64.sqrt(), -(3f64.sqrt())];
    let weights = [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0];
    let mut points = Vec::with_capacity(81);
    let mut base = Vec::with_capacity(81);
    for code in 0..81usize {
        let idx = [code % 3, (code / 3) % 3, (code / 9) % 3, code / 27];
        let c: Vec<f64> = idx.iter().map(|&k| nodes[k]).collect();
        let p: [f64; 4] = std::array::from_fn(|r| z[r] + (0..4).map(|k| axis[(r, k)] * c[k]).sum::<f64>());
        let w: f64 = idx.iter().map(|&k| weights[k]).product();
        let cc: f64 = c.iter().map(|v| v * v).sum();
        points.push(p);
        base.push((w, cc));
    }
    let vals = obj.eval_many(&points);
    let mut ws: Vec<f64> = vals
        .iter()
        .zip(&base)
        .map(|(&v, &(w, cc))| if v.is_finite() { w * (-v - f0 + 0.5 * cc).exp() } else { 0.0 })
        .collect();
    let total: f64 = ws.iter().sum();
    for w in ws.iter_mut() {
        *w /= total;
    }
    let natural = mode.as_array();
    (0..4)
        .map(|i| {
            let (mut m1, mut m2, mut zm, mut zz) = (0.0, 0.0, 0.0, 0.0);
            for (p, &w) in points.iter().zip(&ws) {
                let g = component_from_internal(i, p[i]);
                m1 += w * g;
                m2 += w * g * g;
                zm += w * p[i];
                zz += w * p[i] * p[i];
            }
            let zs = (zz - zm * zm).max(0.0).sqrt();
            HyperRow {
                name: HYPER_NAMES[i].to_string(),
                mean: m1,
                sd: (m2 - m1 * m1).max(0.0).sqrt(),
                q025: component_from_internal(i, zm - Z975 * zs),
                q975: component_from_internal(i, zm + Z975 * zs),
                mode: natural[i],
            }
        })
        .collect()
}

/// Maximizes the hyperparameter posterior and summarizes it by a Gaussian
/// approximation in internal coordinates.
pub fn optimize_hyper(model: &LatentModel<'_>, init: &Hyper, opts: &OptimizerOptions) -> Result<HyperFit> {
    init.validate()?;
    let mut obj = Objective { model, evals: 0 };
    let z0 = init.to_internal();
    let f_init = obj.eval(&z0);
    if !f_init.is_finite() {
        return Err(Error::Numerical(format!("objective not finite at the initial value {init}")));
    }
    let (z1, f1, _) = nelder_mead(&mut obj, z0, opts, opts.max_evals);
    // One restart from the best vertex guards against simplex collapse.
    let remaining = opts.max_evals.saturating_sub(obj.evals).max(20);
    let (mut z, mut f, converged) = nelder_mead(&mut obj, z1, opts, remaining);
    if f1 < f {
        z = z1;
        f = f1;
    }
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!(
            "optimizer stopped after {} evaluations without meeting the tolerance",
            obj.evals
        ));
    }
    let mode = Hyper::from_internal(&z);
    let f0 = -f;
    let h = hessian(&mut obj, &z, f0, opts.hessian_step)?;
    let cov = covariance_from_hessian(&h, &mut warnings);
    let rows = if opts.grid_integration {
        grid_rows(&mut obj, &mode, &z, f0, &cov)
    } else {
        gaussian_rows(&mode, &z, &cov)
    };
    Ok(HyperFit {
        mode,
        covariance: (0..4).map(|i| (0..4).map(|j| cov[(i, j)]).collect()).collect(),
        rows,
        log_posterior: model.log_hyper_posterior(&mode)?,
        evaluations: obj.evals,
        converged,
        warnings,
    })
}
