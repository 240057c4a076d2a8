//! Up-looking sparse Cholesky factorization `P A Pᵀ = L Lᵀ`.
//!
//! The symbolic phase (ordering, elimination tree, column counts) depends only
//! on the pattern of `A` and is computed once; [`SymbolicCholesky::factor`]
//! then refactors any matrix with the identical pattern.

use std::sync::Arc;

use super::ordering::nested_dissection;
use super::sparse::CscMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct SymbolicCholesky {
    n: usize,
    perm: Vec<usize>,
    pinv: Vec<usize>,
    parent: Vec<usize>,
    // pattern of the input, used to validate refactorizations
    a_indptr: Vec<usize>,
    a_indices: Vec<usize>,
    // upper triangle of P A Pᵀ, column-wise, with source positions in A
    c_indptr: Vec<usize>,
    c_indices: Vec<usize>,
    c_source: Vec<usize>,
    l_indptr: Vec<usize>,
}

impl SymbolicCholesky {
    /// Analyzes the pattern of a symmetric matrix stored in full.
    pub fn analyze<T: Real>(a: &CscMatrix<T>) -> Result<Self> {
        let perm = nested_dissection(a);
        Self::with_ordering(a, perm)
    }

    pub fn with_ordering<T: Real>(a: &CscMatrix<T>, perm: Vec<usize>) -> Result<Self> {
        let n = a.ncols();
        if a.nrows() != n {
            return Err(Error::Parameter("Cholesky needs a square matrix".into()));
        }
        if perm.len() != n {
            return Err(Error::Parameter("ordering length mismatch".into()));
        }
        let mut pinv = vec![NONE; n];
        for (k, &i) in perm.iter().enumerate() {
            if i >= n || pinv[i] != NONE {
                return Err(Error::Parameter("ordering is not a permutation".into()));
            }
            pinv[i] = k;
        }

        // Upper triangle of C = P A Pᵀ.
        let mut entries: Vec<(usize, usize, usize)> = Vec::with_capacity(a.nnz() / 2 + n);
        for j in 0..n {
            let r = a.indptr()[j]..a.indptr()[j + 1];
            for p in r {
                let (ci, cj) = (pinv[a.indices()[p]], pinv[j]);
                if ci <= cj {
                    entries.push((cj, ci, p));
                }
            }
        }
        entries.sort_unstable();
        let mut c_indptr = vec![0usize; n + 1];
        for &(cj, _, _) in &entries {
            c_indptr[cj + 1] += 1;
        }
        for j in 0..n {
            c_indptr[j + 1] += c_indptr[j];
        }
        let c_indices: Vec<usize> = entries.iter().map(|e| e.1).collect();
        let c_source: Vec<usize> = entries.iter().map(|e| e.2).collect();

        // Elimination tree.
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for &row in &c_indices[c_indptr[k]..c_indptr[k + 1]] {
                let mut i = row;
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        parent[i] = k;
                    }
                    i = next;
                }
            }
        }

        // Column counts via row subtrees.
        let mut counts = vec![1usize; n];
        let mut mark = vec![NONE; n];
        for k in 0..n {
            mark[k] = k;
            for &row in &c_indices[c_indptr[k]..c_indptr[k + 1]] {
                let mut i = row;
                while i < k && mark[i] != k {
                    counts[i] += 1;
                    mark[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut l_indptr = vec![0usize; n + 1];
        for j in 0..n {
            l_indptr[j + 1] = l_indptr[j] + counts[j];
        }

        Ok(Self {
            n,
            perm,
            pinv,
            parent,
            a_indptr: a.indptr().to_vec(),
            a_indices: a.indices().to_vec(),
            c_indptr,
            c_indices,
            c_source,
            l_indptr,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries in `L`, diagonal included.
    pub fn factor_nnz(&self) -> usize {
        self.l_indptr[self.n]
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Numeric factorization of a matrix sharing the analyzed pattern.
    pub fn factor<T: Real>(self: &Arc<Self>, a: &CscMatrix<T>) -> Result<SparseCholesky<T>> {
        if a.indptr() != self.a_indptr.as_slice() || a.indices() != self.a_indices.as_slice() {
            return Err(Error::Parameter(
                "matrix pattern differs from the analyzed pattern".into(),
            ));
        }
        let n = self.n;
        let ad = a.data();
        let lp = &self.l_indptr;
        let nnz = lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![T::zero(); nnz];
        let mut next: Vec<usize> = lp[..n].to_vec();
        let mut x = vec![T::zero(); n];
        let mut mark = vec![NONE; n];
        let mut stack = vec![0usize; n];

        for k in 0..n {
            // Row pattern of L(k, :) in topological order, stored in stack[top..n].
            let mut top = n;
            mark[k] = k;
            let cols = self.c_indptr[k]..self.c_indptr[k + 1];
            for p in cols.clone() {
                let mut i = self.c_indices[p];
                if i > k {
                    continue;
                }
                x[i] += ad[self.c_source[p]];
                let mut len = 0;
                while mark[i] != k {
                    stack[len] = i;
                    len += 1;
                    mark[i] = k;
                    i = self.parent[i];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    stack[top] = stack[len];
                }
            }
            let mut d = x[k];
            x[k] = T::zero();
            for t in top..n {
                let i = stack[t];
                let lki = x[i] / lx[lp[i]];
                x[i] = T::zero();
                for p in lp[i] + 1..next[i] {
                    x[li[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                li[p] = k;
                lx[p] = lki;
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: self.perm[k],
                });
            }
            let p = next[k];
            next[k] += 1;
            li[p] = k;
            lx[p] = d.sqrt();
        }
        Ok(SparseCholesky {
            symbolic: Arc::clone(self),
            li,
            lx,
        })
    }
}

/// Numeric Cholesky factor.
#[derive(Debug, Clone)]
pub struct SparseCholesky<T> {
    symbolic: Arc<SymbolicCholesky>,
    li: Vec<usize>,
    lx: Vec<T>,
}

impl<T: Real> SparseCholesky<T> {
    /// One-shot analysis and factorization.
    pub fn new(a: &CscMatrix<T>) -> Result<Self> {
        Arc::new(SymbolicCholesky::analyze(a)?).factor(a)
    }

    pub fn symbolic(&self) -> &Arc<SymbolicCholesky> {
        &self.symbolic
    }

    pub fn dim(&self) -> usize {
        self.symbolic.n
    }

    /// `log det A`.
    pub fn log_det(&self) -> T {
        let lp = &self.symbolic.l_indptr;
        (0..self.symbolic.n)
            .map(|j| self.lx[lp[j]].ln())
            .sum::<T>()
            * T::lit(2.0)
    }

    /// Solves `L y = b` in place (permuted coordinates).
    fn lsolve(&self, y: &mut [T]) {
        let lp = &self.symbolic.l_indptr;
        for j in 0..self.symbolic.n {
            let r = lp[j]..lp[j + 1];
            y[j] /= self.lx[r.start];
            let yj = y[j];
            for p in r.start + 1..r.end {
                y[self.li[p]] -= self.lx[p] * yj;
            }
        }
    }

    /// Solves `Lᵀ y = b` in place (permuted coordinates).
    fn ltsolve(&self, y: &mut [T]) {
        let lp = &self.symbolic.l_indptr;
        for j in (0..self.symbolic.n).rev() {
            let r = lp[j]..lp[j + 1];
            let mut s = y[j];
            for p in r.start + 1..r.end {
                s -= self.lx[p] * y[self.li[p]];
            }
            y[j] = s / self.lx[r.start];
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let sym = &self.symbolic;
        assert_eq!(b.len(), sym.n);
        let mut y: Vec<T> = sym.perm.iter().map(|&i| b[i]).collect();
        self.lsolve(&mut y);
        self.ltsolve(&mut y);
        let mut x = vec![T::zero(); sym.n];
        for (k, &i) in sym.perm.iter().enumerate() {
            x[i] = y[k];
        }
        x
    }

    /// Maps a standard normal vector `z` to a draw from `N(0, A⁻¹)`.
    pub fn sample_from_standard(&self, z: &[T]) -> Vec<T> {
        let sym = &self.symbolic;
        assert_eq!(z.len(), sym.n);
        let mut y = z.to_vec();
        self.ltsolve(&mut y);
        let mut x = vec![T::zero(); sym.n];
        for (k, &i) in sym.perm.iter().enumerate() {
            x[i] = y[k];
        }
        x
    }

    /// `bᵀ A⁻¹ b`, computed as `|L⁻¹ P b|²`.
    pub fn inv_quadratic_form(&self, b: &[T]) -> T {
        let sym = &self.symbolic;
        let mut y: Vec<T> = sym.perm.iter().map(|&i| b[i]).collect();
        self.lsolve(&mut y);
        y.iter().map(|&v| v * v).sum()
    }

    /// Permuted elimination position of original index `i`.
    pub fn position(&self, i: usize) -> usize {
        self.symbolic.pinv[i]
    }
}
