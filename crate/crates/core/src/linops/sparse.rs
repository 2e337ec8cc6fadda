use super::{LinearOperator, OperatorKind};
use crate::{Error, Result};
use nalgebra::DMatrix;

/// Coordinate-format accumulator. Duplicate entries are summed when the
/// triplets are compressed.
#[derive(Debug, Clone)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Adds `scale * block` with its (0, 0) entry at `(row_offset, col_offset)`.
    pub fn push_block(&mut self, row_offset: usize, col_offset: usize, block: &CscMatrix, scale: f64) {
        for (i, j, v) in block.iter() {
            self.push(row_offset + i, col_offset + j, scale * v);
        }
    }

    /// Adds `scale * blockᵀ` with its (0, 0) entry at `(row_offset, col_offset)`.
    pub fn push_block_transposed(
        &mut self,
        row_offset: usize,
        col_offset: usize,
        block: &CscMatrix,
        scale: f64,
    ) {
        for (i, j, v) in block.iter() {
            self.push(row_offset + j, col_offset + i, scale * v);
        }
    }

    pub fn push_diagonal(&mut self, offset: usize, diag: &[f64]) {
        for (k, &d) in diag.iter().enumerate() {
            self.push(offset + k, offset + k, d);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_csc(&self) -> CscMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &(_, j, _) in &self.entries {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; self.entries.len()];
        let mut vals = vec![0.0; self.entries.len()];
        for &(i, j, v) in &self.entries {
            let p = next[j];
            rows[p] = i;
            vals[p] = v;
            next[j] += 1;
        }
        // sort each column by row and merge duplicates
        let mut colptr = vec![0usize; self.ncols + 1];
        let mut rowind = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len());
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for j in 0..self.ncols {
            scratch.clear();
            scratch.extend((counts[j]..counts[j + 1]).map(|p| (rows[p], vals[p])));
            scratch.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(i, v) in &scratch {
                if last == Some(i) {
                    *values.last_mut().unwrap() += v;
                } else {
                    rowind.push(i);
                    values.push(v);
                    last = Some(i);
                }
            }
            colptr[j + 1] = rowind.len();
        }
        CscMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            colptr,
            rowind,
            values,
        }
    }
}

/// Compressed sparse column matrix with sorted, duplicate-free row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    colptr: Vec<usize>,
    rowind: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut t = Triplets::with_capacity(nrows, ncols, entries.len());
        for &(i, j, v) in entries {
            if i >= nrows || j >= ncols {
                return Err(Error::invalid(format!(
                    "entry ({i}, {j}) outside a {nrows}x{ncols} matrix"
                )));
            }
            t.push(i, j, v);
        }
        Ok(t.to_csc())
    }

    /// Builds directly from compressed arrays, validating the structure.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        colptr: Vec<usize>,
        rowind: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if colptr.len() != ncols + 1 || colptr[0] != 0 || *colptr.last().unwrap() != rowind.len() {
            return Err(Error::invalid("malformed column pointer array"));
        }
        if rowind.len() != values.len() {
            return Err(Error::invalid("row index and value arrays differ in length"));
        }
        for j in 0..ncols {
            if colptr[j] > colptr[j + 1] {
                return Err(Error::invalid("column pointers must be non-decreasing"));
            }
            let col = &rowind[colptr[j]..colptr[j + 1]];
            if col.iter().any(|&i| i >= nrows) || col.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!("column {j} has unsorted or out-of-range rows")));
            }
        }
        Ok(Self {
            nrows,
            ncols,
            colptr,
            rowind,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowind: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            colptr: (0..=n).collect(),
            rowind: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn from_dense(dense: &DMatrix<f64>) -> Self {
        let mut t = Triplets::new(dense.nrows(), dense.ncols());
        for j in 0..dense.ncols() {
            for i in 0..dense.nrows() {
                let v = dense[(i, j)];
                if v != 0.0 {
                    t.push(i, j, v);
                }
            }
        }
        t.to_csc()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }

    pub fn rowind(&self) -> &[usize] {
        &self.rowind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Row indices and values of column `j`.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.colptr[j]..self.colptr[j + 1];
        (&self.rowind[r.clone()], &self.values[r])
    }

    /// Iterates `(row, col, value)` in column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            (self.colptr[j]..self.colptr[j + 1]).map(move |p| (self.rowind[p], j, self.values[p]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (rows, vals) = self.column(j);
        match rows.binary_search(&i) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> CscMatrix {
        let mut counts = vec![0usize; self.nrows + 1];
        for &i in &self.rowind {
            counts[i + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut rowind = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                let i = self.rowind[p];
                let q = next[i];
                rowind[q] = j;
                values[q] = self.values[p];
                next[i] += 1;
            }
        }
        CscMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            colptr: counts,
            rowind,
            values,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|k| self.get(k, k)).collect()
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> CscMatrix {
        let mut colptr = Vec::with_capacity(keep.len() + 1);
        colptr.push(0);
        let mut rowind = Vec::new();
        let mut values = Vec::new();
        for &j in keep {
            let (r, v) = self.column(j);
            rowind.extend_from_slice(r);
            values.extend_from_slice(v);
            colptr.push(rowind.len());
        }
        CscMatrix {
            nrows: self.nrows,
            ncols: keep.len(),
            colptr,
            rowind,
            values,
        }
    }

    /// Principal submatrix on `keep` (rows and columns).
    pub fn select_principal(&self, keep: &[usize]) -> CscMatrix {
        let mut map = vec![usize::MAX; self.nrows];
        for (k, &i) in keep.iter().enumerate() {
            map[i] = k;
        }
        let mut t = Triplets::new(keep.len(), keep.len());
        for (kj, &j) in keep.iter().enumerate() {
            let (r, v) = self.column(j);
            for (&i, &x) in r.iter().zip(v) {
                if map[i] != usize::MAX {
                    t.push(map[i], kj, x);
                }
            }
        }
        t.to_csc()
    }

    /// Rows `start..end` as a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> CscMatrix {
        let mut t = Triplets::new(end - start, self.ncols);
        for (i, j, v) in self.iter() {
            if i >= start && i < end {
                t.push(i - start, j, v);
            }
        }
        t.to_csc()
    }

    /// `A diag(w) Aᵀ`, including structurally present entries whose value is zero
    /// (the pattern depends only on the pattern of `A`).
    pub fn weighted_gram(&self, weights: &[f64]) -> CscMatrix {
        assert_eq!(weights.len(), self.ncols);
        let mut t = Triplets::new(self.nrows, self.nrows);
        for j in 0..self.ncols {
            let (r, v) = self.column(j);
            let w = weights[j];
            for (a, &i) in r.iter().enumerate() {
                for (b, &k) in r.iter().enumerate() {
                    t.push(i, k, w * v[a] * v[b]);
                }
            }
        }
        t.to_csc()
    }

    /// Upper triangle (including the diagonal).
    pub fn upper_triangle(&self) -> CscMatrix {
        let mut t = Triplets::new(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            if i <= j {
                t.push(i, j, v);
            }
        }
        t.to_csc()
    }

    pub fn add_diagonal(&self, diag: &[f64]) -> CscMatrix {
        let mut t = Triplets::with_capacity(self.nrows, self.ncols, self.nnz() + diag.len());
        t.push_block(0, 0, self, 1.0);
        t.push_diagonal(0, diag);
        t.to_csc()
    }

    pub fn scale(&self, alpha: f64) -> CscMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            d[(i, j)] += v;
        }
        d
    }

    /// True when the matrix equals its transpose entrywise to `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let t = self.transpose();
        self.iter().all(|(i, j, v)| (t.get(i, j) - v).abs() <= tol)
            && t.iter().all(|(i, j, v)| (self.get(i, j) - v).abs() <= tol)
    }
}

impl LinearOperator for CscMatrix {
    fn rows(&self) -> usize {
        self.nrows
    }

    fn cols(&self) -> usize {
        self.ncols
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::SparseTriplet
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in 0..self.ncols {
            let vj = v[j];
            if vj == 0.0 {
                continue;
            }
            for p in self.colptr[j]..self.colptr[j + 1] {
                out[self.rowind[p]] += self.values[p] * vj;
            }
        }
    }

    fn apply_transpose_into(&self, u: &[f64], out: &mut [f64]) {
        for j in 0..self.ncols {
            let mut acc = 0.0;
            for p in self.colptr[j]..self.colptr[j + 1] {
                acc += self.values[p] * u[self.rowind[p]];
            }
            out[j] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicates_are_summed() {
        let a = CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0)]).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 0), 2.0);
        assert_eq!(a.get(1, 1), 0.0);
    }

    #[test]
    fn out_of_range_triplet_rejected() {
        assert!(CscMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn from_parts_validates() {
        assert!(CscMatrix::from_parts(2, 1, vec![0, 2], vec![1, 0], vec![1.0, 2.0]).is_err());
        assert!(CscMatrix::from_parts(2, 1, vec![0, 2], vec![0, 1], vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn weighted_gram_matches_dense() {
        let a = CscMatrix::from_triplets(
            3,
            4,
            &[(0, 0, 1.0), (1, 1, -2.0), (2, 1, 0.5), (0, 3, 4.0), (2, 2, 1.5), (1, 3, 1.0)],
        )
        .unwrap();
        let w = [0.5, 2.0, 1.0, 3.0];
        let g = a.weighted_gram(&w).to_dense();
        let ad = a.to_dense();
        let expect = &ad * DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&w)) * ad.transpose();
        assert!((g - expect).abs().max() < 1e-14);
    }

    #[test]
    fn select_principal_picks_submatrix() {
        let a = CscMatrix::from_dense(&DMatrix::from_fn(4, 4, |i, j| (10 * i + j) as f64));
        let s = a.select_principal(&[1, 3]).to_dense();
        assert_eq!(s[(0, 0)], 11.0);
        assert_eq!(s[(0, 1)], 13.0);
        assert_eq!(s[(1, 0)], 31.0);
        assert_eq!(s[(1, 1)], 33.0);
    }

    proptest! {
        #[test]
        fn transpose_is_involution(entries in prop::collection::vec((0usize..6, 0usize..5, -3.0f64..3.0), 0..30)) {
            let a = CscMatrix::from_triplets(6, 5, &entries).unwrap();
            prop_assert_eq!(a.transpose().transpose(), a.clone());
            let dt = a.to_dense().transpose();
            prop_assert!((a.transpose().to_dense() - dt).abs().max() == 0.0);
        }
    }
}
