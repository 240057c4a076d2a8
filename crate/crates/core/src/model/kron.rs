//! Conditional computations in the eigenbasis of the AR1 precision.
//!
//! Write `Q_time = V diag(λ) Vᵀ`. In the rotated coordinates
//! `ξ' = (Vᵀ ⊗ I) ξ` the prior is block diagonal, and with every cell
//! observed the likelihood term `I ⊗ AᵀA / σ²` is unchanged by the rotation.
//! So `Q_c` becomes an arrowhead: blocks `B_s = λ_s Q_s + AᵀA / σ²` and a
//! border for β. Unobserved cells are taken back out by a rank-k Woodbury
//! correction.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{CscMatrix, SparseCholesky, SymbolicCholesky};

use super::ar1::ar1_precision;
use super::dataset::StDataset;

/// Largest number of unobserved cells handled by the correction.
const MAX_MISSING: usize = 1500;
/// Cap on `k × dim` for the stored correction columns.
const MAX_CORRECTION: usize = 40_000_000;

/// Hyperparameter-free pieces.
pub(crate) struct KronData {
    m: usize,
    weeks: usize,
    p1: usize,
    ata: CscMatrix<f64>,
    /// `AᵀX`, `m × (p+1)`.
    atx: DMatrix<f64>,
    /// `Σ_t XᵀX` over all cells, i.e. `T XᵀX`.
    xtx_all: DMatrix<f64>,
    /// Unobserved `(area, week)` cells.
    missing: Vec<(usize, usize)>,
    rows: Vec<Vec<(usize, f64)>>,
    design: Vec<Vec<f64>>,
    block_symbolic: OnceLock<Arc<SymbolicCholesky>>,
}

impl KronData {
    /// `None` when too many cells are unobserved for the correction.
    pub(crate) fn new(data: &StDataset) -> Option<Self> {
        let (na, m, t, p1) = (data.n_areas(), data.n_nodes(), data.weeks, data.n_coef());
        let mut seen = vec![false; na * t];
        for o in &data.observations {
            seen[(o.week - 1) * na + o.area] = true;
        }
        let missing: Vec<(usize, usize)> = (0..na * t)
            .filter(|&c| !seen[c])
            .map(|c| (c % na, c / na + 1))
            .collect();
        let dim = data.latent_dim();
        if missing.len() > MAX_MISSING || missing.len() * dim > MAX_CORRECTION {
            return None;
        }
        let a = &data.projector;
        let ata = a.transpose().matmul(a);
        let rows = data.projector_rows();
        let mut atx = DMatrix::zeros(m, p1);
        for (area, r) in rows.iter().enumerate() {
            for &(node, w) in r {
                for j in 0..p1 {
                    atx[(node, j)] += w * data.design[area][j];
                }
            }
        }
        let xm = DMatrix::from_fn(na, p1, |i, j| data.design[i][j]);
        let xtx_all = xm.transpose() * &xm * t as f64;
        Some(Self {
            m,
            weeks: t,
            p1,
            ata,
            atx,
            xtx_all,
            missing,
            rows,
            design: data.design.clone(),
            block_symbolic: OnceLock::new(),
        })
    }

    fn factor_block(&self, b: &CscMatrix<f64>) -> Result<SparseCholesky<f64>> {
        if let Some(sym) = self.block_symbolic.get() {
            return sym.factor(b);
        }
        let sym = Arc::new(SymbolicCholesky::analyze(b)?);
        self.block_symbolic.get_or_init(|| sym).clone().factor(b)
    }

    /// Factors `Q_c` for the given spatial precision, AR1 coefficient and
    /// noise precision, and solves for the conditional mean of `b`
    /// (original coordinates).
    pub(crate) fn factor(
        &self,
        q_s: &CscMatrix<f64>,
        alpha: f64,
        prec_e: f64,
        beta_precision: f64,
        b: &[f64],
    ) -> Result<KronFactor> {
        let (m, t, p1) = (self.m, self.weeks, self.p1);
        let q_time = ar1_precision(alpha, t)?.to_dense();
        let eig = DMatrix::from_fn(t, t, |i, j| q_time[i][j]).symmetric_eigen();
        let v = eig.eigenvectors;
        let lambda: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let w: Vec<f64> = (0..t).map(|s| v.column(s).sum()).collect();

        let blocks: Vec<SparseCholesky<f64>> = lambda
            .par_iter()
            .map(|&l| self.factor_block(&CscMatrix::linear_combination(l, q_s, prec_e, &self.ata)))
            .collect::<Result<_>>()
            .map_err(|e| Error::Numerical(format!("rotated block factorization: {e}")))?;
        // Y_s = B_s⁻¹ AᵀX
        let y: Vec<DMatrix<f64>> = blocks
            .par_iter()
            .map(|f| {
                let mut out = DMatrix::zeros(m, p1);
                for j in 0..p1 {
                    let col: Vec<f64> = self.atx.column(j).iter().copied().collect();
                    out.set_column(j, &DVector::from_vec(f.solve(&col)));
                }
                out
            })
            .collect();
        let mut s = DMatrix::<f64>::identity(p1, p1) * beta_precision + &self.xtx_all * prec_e;
        for k in 0..t {
            s -= (self.atx.transpose() * &y[k]) * (w[k] * w[k] * prec_e * prec_e);
        }
        let s = (&s + s.transpose()) * 0.5;
        let s_chol = s
            .cholesky()
            .ok_or_else(|| Error::Numerical("coefficient Schur complement is not positive definite".into()))?;
        let mut log_det: f64 = blocks.iter().map(|f| f.log_det()).sum();
        log_det += s_chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum::<f64>();

        let mut f = KronFactor {
            m,
            weeks: t,
            p1,
            v,
            w,
            prec_e,
            blocks,
            y,
            atx: self.atx.clone(),
            s_chol,
            correction: None,
            log_det,
            b_quad: 0.0,
            mean: Vec::new(),
        };

        let b_rot = f.rotate(b);
        let g = f.solve_full(&b_rot);
        let mut b_quad: f64 = b_rot.iter().zip(&g).map(|(a, c)| a * c).sum();
        let mut mean_rot = g;
        if !self.missing.is_empty() {
            let scale = prec_e.sqrt();
            // Sparse columns of U: rotated design rows of the unobserved cells.
            let u: Vec<Vec<(usize, f64)>> = self
                .missing
                .iter()
                .map(|&(area, week)| {
                    let mut col: Vec<(usize, f64)> =
                        (0..p1).map(|j| (j, scale * self.design[area][j])).collect();
                    for sidx in 0..t {
                        let vts = scale * f.v[(week - 1, sidx)];
                        let off = p1 + sidx * m;
                        col.extend(self.rows[area].iter().map(|&(node, a)| (off + node, vts * a)));
                    }
                    col
                })
                .collect();
            let dim = p1 + m * t;
            let wcols: Vec<Vec<f64>> = u
                .par_iter()
                .map(|c| {
                    let mut dense = vec![0.0; dim];
                    for &(i, v) in c {
                        dense[i] += v;
                    }
                    f.solve_full(&dense)
                })
                .collect();
            let k = u.len();
            let dot = |a: &[(usize, f64)], c: &[f64]| a.iter().map(|&(i, x)| x * c[i]).sum::<f64>();
            let mm = DMatrix::from_fn(k, k, |i, j| (if i == j { 1.0 } else { 0.0 }) - dot(&u[i], &wcols[j]));
            let mm = (&mm + mm.transpose()) * 0.5;
            let m_chol = mm
                .cholesky()
                .ok_or_else(|| Error::Numerical("censored-cell correction is not positive definite".into()))?;
            let utg = DVector::from_iterator(k, u.iter().map(|c| dot(c, &mean_rot)));
            let h = m_chol.solve(&utg);
            b_quad += utg.dot(&h);
            for (col, &hi) in wcols.iter().zip(h.iter()) {
                for (x, c) in mean_rot.iter_mut().zip(col) {
                    *x += c * hi;
                }
            }
            f.log_det += m_chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum::<f64>();
            let l_t = m_chol.l().transpose();
            f.correction = Some(Correction { w: wcols, l_t });
        }
        let mean = f.unrotate(&mean_rot);
        f.b_quad = b_quad;
        f.mean = mean;
        Ok(f)
    }
}

struct Correction {
    /// `Q_f⁻¹ U`, rotated coordinates.
    w: Vec<Vec<f64>>,
    /// Transposed Cholesky factor of `I - Uᵀ Q_f⁻¹ U`.
    l_t: DMatrix<f64>,
}

/// Factorized `Q_c` in rotated coordinates.
pub(crate) struct KronFactor {
    m: usize,
    weeks: usize,
    p1: usize,
    v: DMatrix<f64>,
    w: Vec<f64>,
    prec_e: f64,
    blocks: Vec<SparseCholesky<f64>>,
    y: Vec<DMatrix<f64>>,
    atx: DMatrix<f64>,
    s_chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    correction: Option<Correction>,
    /// `log|Q_c|`.
    pub(crate) log_det: f64,
    /// `bᵀ Q_c⁻¹ b`.
    pub(crate) b_quad: f64,
    /// `Q_c⁻¹ b`, original coordinates.
    pub(crate) mean: Vec<f64>,
}

impl KronFactor {
    pub(crate) fn dim(&self) -> usize {
        self.p1 + self.m * self.weeks
    }

    fn rotate(&self, x: &[f64]) -> Vec<f64> {
        self.mix(x, true)
    }

    fn unrotate(&self, x: &[f64]) -> Vec<f64> {
        self.mix(x, false)
    }

    /// `ξ'_s = Σ_t V_ts ξ_t` (forward) or `ξ_t = Σ_s V_ts ξ'_s`.
    fn mix(&self, x: &[f64], forward: bool) -> Vec<f64> {
        let (m, t, p1) = (self.m, self.weeks, self.p1);
        let mut out = vec![0.0; x.len()];
        out[..p1].copy_from_slice(&x[..p1]);
        for a in 0..t {
            let dst = &mut out[p1 + a * m..p1 + (a + 1) * m];
            for c in 0..t {
                let coef = if forward { self.v[(c, a)] } else { self.v[(a, c)] };
                let src = &x[p1 + c * m..p1 + (c + 1) * m];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += coef * s);
            }
        }
        out
    }

    /// `Q_f⁻¹ r` for the fully observed precision, rotated coordinates.
    fn solve_full(&self, r: &[f64]) -> Vec<f64> {
        let (m, p1) = (self.m, self.p1);
        let t: Vec<Vec<f64>> = self
            .blocks
            .iter()
            .enumerate()
            .map(|(s, f)| f.solve(&r[p1 + s * m..p1 + (s + 1) * m]))
            .collect();
        let mut rb = DVector::from_column_slice(&r[..p1]);
        for (s, ts) in t.iter().enumerate() {
            let proj = self.atx.transpose() * DVector::from_column_slice(ts);
            rb -= proj * (self.w[s] * self.prec_e);
        }
        let xb = self.s_chol.solve(&rb);
        let mut out = Vec::with_capacity(self.dim());
        out.extend(xb.iter());
        for (s, ts) in t.into_iter().enumerate() {
            let corr = &self.y[s] * &xb * (self.w[s] * self.prec_e);
            out.extend(ts.iter().zip(corr.iter()).map(|(a, c)| a - c));
        }
        out
    }

    pub(crate) fn normals_needed(&self) -> usize {
        self.dim() + self.correction.as_ref().map_or(0, |c| c.w.len())
    }

    /// Draw of `u - mean` in original coordinates.
    pub(crate) fn sample_deviation(&self, z: &[f64]) -> Vec<f64> {
        let (m, p1) = (self.m, self.p1);
        let zb = DVector::from_column_slice(&z[..p1]);
        let xb = self
            .s_chol
            .l()
            .transpose()
            .solve_upper_triangular(&zb)
            .expect("Cholesky factor has a positive diagonal");
        let mut x = Vec::with_capacity(self.dim());
        x.extend(xb.iter());
        for (s, f) in self.blocks.iter().enumerate() {
            let draw = f.sample_from_standard(&z[p1 + s * m..p1 + (s + 1) * m]);
            let corr = &self.y[s] * &xb * (self.w[s] * self.prec_e);
            x.extend(draw.iter().zip(corr.iter()).map(|(a, c)| a - c));
        }
        if let Some(c) = &self.correction {
            let k = c.w.len();
            let zk = DVector::from_column_slice(&z[self.dim()..self.dim() + k]);
            let h = c.l_t.solve_upper_triangular(&zk).expect("Cholesky factor has a positive diagonal");
            for (col, &hi) in c.w.iter().zip(h.iter()) {
                x.iter_mut().zip(col).for_each(|(a, b)| *a += b * hi);
            }
        }
        self.unrotate(&x)
    }
}
