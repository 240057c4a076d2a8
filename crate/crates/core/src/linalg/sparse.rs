//! Compressed sparse column storage.
//!
//! Explicit zeros are kept. Assembly routines never drop structural entries,
//! so a matrix built from the same recipe always has the same pattern, which
//! lets a symbolic factorization be reused across parameter values.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> CscMatrix<T> {
    /// Builds a matrix from raw parts. Row indices within each column must be
    /// strictly increasing.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        data: Vec<T>,
    ) -> Result<Self> {
        if indptr.len() != ncols + 1 || indices.len() != data.len() || indptr[ncols] != data.len()
        {
            return Err(Error::Parameter("inconsistent CSC parts".into()));
        }
        for j in 0..ncols {
            let col = &indices[indptr[j]..indptr[j + 1]];
            if col.windows(2).any(|w| w[0] >= w[1]) || col.iter().any(|&i| i >= nrows) {
                return Err(Error::Parameter(format!("column {j} has unsorted or invalid rows")));
            }
        }
        Ok(Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        })
    }

    /// Assembles from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; ncols + 1];
        for &(i, j, _) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            counts[j + 1] += 1;
        }
        for j in 0..ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![T::zero(); triplets.len()];
        for &(i, j, v) in triplets {
            let p = next[j];
            rows[p] = i;
            vals[p] = v;
            next[j] += 1;
        }
        let mut indptr = Vec::with_capacity(ncols + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for j in 0..ncols {
            order.clear();
            order.extend(counts[j]..counts[j + 1]);
            order.sort_by_key(|&p| rows[p]);
            let mut last = usize::MAX;
            for &p in &order {
                if rows[p] == last {
                    *data.last_mut().unwrap() += vals[p];
                } else {
                    indices.push(rows[p]);
                    data.push(vals[p]);
                    last = rows[p];
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); n])
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: diag.to_vec(),
        }
    }

    /// Dense row-major input; zeros are not stored.
    pub fn from_dense(nrows: usize, ncols: usize, rows: &[Vec<T>]) -> Self {
        let mut trip = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &trip)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Iterates `(row, value)` of column `j`.
    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.indptr[j]..self.indptr[j + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.data[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.indptr[j]..self.indptr[j + 1];
        match self.indices[r.clone()].binary_search(&i) {
            Ok(k) => self.data[r.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.indptr == other.indptr
            && self.indices == other.indices
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                trip.push((j, i, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &trip)
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![T::zero(); self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            for (i, v) in self.col(j) {
                y[i] += v * xj;
            }
        }
        y
    }

    /// `y = Aᵀ x`
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        (0..self.ncols)
            .map(|j| self.col(j).map(|(i, v)| v * x[i]).sum())
            .collect()
    }

    /// Sparse product `A B`. Structural entries are kept even when they
    /// cancel numerically.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut indptr = Vec::with_capacity(other.ncols + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        let mut mark = vec![usize::MAX; self.nrows];
        let mut acc = vec![T::zero(); self.nrows];
        let mut rows: Vec<usize> = Vec::new();
        indptr.push(0);
        for j in 0..other.ncols {
            rows.clear();
            for (k, bkj) in other.col(j) {
                for (i, aik) in self.col(k) {
                    if mark[i] != j {
                        mark[i] = j;
                        acc[i] = T::zero();
                        rows.push(i);
                    }
                    acc[i] += aik * bkj;
                }
            }
            rows.sort_unstable();
            for &i in &rows {
                indices.push(i);
                data.push(acc[i]);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: self.nrows,
            ncols: other.ncols,
            indptr,
            indices,
            data,
        }
    }

    /// `a A + b B` over the union of both patterns.
    pub fn linear_combination(a: T, lhs: &Self, b: T, rhs: &Self) -> Self {
        assert_eq!((lhs.nrows, lhs.ncols), (rhs.nrows, rhs.ncols));
        let mut indptr = Vec::with_capacity(lhs.ncols + 1);
        let mut indices = Vec::with_capacity(lhs.nnz().max(rhs.nnz()));
        let mut data = Vec::with_capacity(lhs.nnz().max(rhs.nnz()));
        indptr.push(0);
        for j in 0..lhs.ncols {
            let (mut p, pe) = (lhs.indptr[j], lhs.indptr[j + 1]);
            let (mut q, qe) = (rhs.indptr[j], rhs.indptr[j + 1]);
            while p < pe || q < qe {
                let ip = if p < pe { lhs.indices[p] } else { usize::MAX };
                let iq = if q < qe { rhs.indices[q] } else { usize::MAX };
                if ip == iq {
                    indices.push(ip);
                    data.push(a * lhs.data[p] + b * rhs.data[q]);
                    p += 1;
                    q += 1;
                } else if ip < iq {
                    indices.push(ip);
                    data.push(a * lhs.data[p]);
                    p += 1;
                } else {
                    indices.push(iq);
                    data.push(b * rhs.data[q]);
                    q += 1;
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: lhs.nrows,
            ncols: lhs.ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::linear_combination(T::one(), self, T::one(), other)
    }

    /// Kronecker product `A ⊗ B`.
    pub fn kron(&self, other: &Self) -> Self {
        let (mb, nb) = (other.nrows, other.ncols);
        let mut indptr = Vec::with_capacity(self.ncols * nb + 1);
        let mut indices = Vec::with_capacity(self.nnz() * other.nnz());
        let mut data = Vec::with_capacity(self.nnz() * other.nnz());
        indptr.push(0);
        for ja in 0..self.ncols {
            for jb in 0..nb {
                for (ia, va) in self.col(ja) {
                    for (ib, vb) in other.col(jb) {
                        indices.push(ia * mb + ib);
                        data.push(va * vb);
                    }
                }
                indptr.push(indices.len());
            }
        }
        Self {
            nrows: self.nrows * mb,
            ncols: self.ncols * nb,
            indptr,
            indices,
            data,
        }
    }

    /// Block-diagonal stacking of square or rectangular blocks.
    pub fn block_diag(blocks: &[&Self]) -> Self {
        let nrows = blocks.iter().map(|b| b.nrows).sum();
        let ncols = blocks.iter().map(|b| b.ncols).sum();
        let mut indptr = Vec::with_capacity(ncols + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        let mut row_off = 0;
        for b in blocks {
            for j in 0..b.ncols {
                for (i, v) in b.col(j) {
                    indices.push(i + row_off);
                    data.push(v);
                }
                indptr.push(indices.len());
            }
            row_off += b.nrows;
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Horizontal concatenation `[A, B]`.
    pub fn hstack(lhs: &Self, rhs: &Self) -> Self {
        assert_eq!(lhs.nrows, rhs.nrows);
        let mut indptr = lhs.indptr.clone();
        let off = lhs.nnz();
        indptr.extend(rhs.indptr[1..].iter().map(|&p| p + off));
        let mut indices = lhs.indices.clone();
        indices.extend_from_slice(&rhs.indices);
        let mut data = lhs.data.clone();
        data.extend_from_slice(&rhs.data);
        Self {
            nrows: lhs.nrows,
            ncols: lhs.ncols + rhs.ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<T> {
        let mut s = vec![T::zero(); self.nrows];
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                s[i] += v;
            }
        }
        s
    }

    /// Largest absolute asymmetry `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> T {
        let t = self.transpose();
        let d = Self::linear_combination(T::one(), self, -T::one(), &t);
        d.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.ncols]; self.nrows];
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                out[i][j] = v;
            }
        }
        out
    }

    /// Rows `rows` gathered into a new matrix, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let t = self.transpose();
        let mut trip = Vec::new();
        for (new_i, &old_i) in rows.iter().enumerate() {
            for (j, v) in t.col(old_i) {
                trip.push((new_i, j, v));
            }
        }
        Self::from_triplets(rows.len(), self.ncols, &trip)
    }

    /// Converts scalar type.
    pub fn cast<U: Real>(&self) -> CscMatrix<U> {
        CscMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}
