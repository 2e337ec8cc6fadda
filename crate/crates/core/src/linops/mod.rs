//! Linear operators: explicit sparse and dense matrices, stacked
//! finite-difference operators, and block-circulant convolutions applied
//! through the 2D FFT.
//!
//! Every operator is immutable after construction and may be applied from
//! several threads at once.

mod bccb;
mod difference;
mod kernel;
mod sparse;

pub use bccb::{dense_circulant, BccbOperator};
pub use difference::{make_difference_operator, make_tv_operator, DifferenceOperator};
pub use kernel::{BlurFamily, BlurKernel};
pub use sparse::{CscMatrix, Triplets};

use nalgebra::DMatrix;

/// Storage family of an operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Dense,
    SparseTriplet,
    BccbConvolution,
    StackedDifference,
    Composite,
}

/// A dimensioned linear map with a transpose action.
///
/// `apply_into` expects `v.len() == cols()` and `out.len() == rows()`;
/// `apply_transpose_into` the reverse. Both overwrite `out`.
pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn kind(&self) -> OperatorKind;
    fn apply_into(&self, v: &[f64], out: &mut [f64]);
    fn apply_transpose_into(&self, u: &[f64], out: &mut [f64]);

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        self.apply_into(v, &mut out);
        out
    }

    fn apply_transpose(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        self.apply_transpose_into(u, &mut out);
        out
    }
}

impl LinearOperator for DMatrix<f64> {
    fn rows(&self) -> usize {
        self.nrows()
    }

    fn cols(&self) -> usize {
        self.ncols()
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Dense
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, col) in self.column_iter().enumerate() {
            let vj = v[j];
            if vj == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(col.iter()) {
                *o += a * vj;
            }
        }
    }

    fn apply_transpose_into(&self, u: &[f64], out: &mut [f64]) {
        for (j, col) in self.column_iter().enumerate() {
            out[j] = col.iter().zip(u).map(|(a, b)| a * b).sum();
        }
    }
}

/// Vertical concatenation `[A₁; A₂; …]` of operators sharing a column count.
pub struct StackedOperator {
    blocks: Vec<Box<dyn LinearOperator>>,
    rows: usize,
    cols: usize,
}

impl StackedOperator {
    pub fn new(blocks: Vec<Box<dyn LinearOperator>>) -> crate::Result<Self> {
        let cols = blocks
            .first()
            .map(|b| b.cols())
            .ok_or_else(|| crate::Error::invalid("stacked operator needs at least one block"))?;
        if blocks.iter().any(|b| b.cols() != cols) {
            return Err(crate::Error::dims("stacked blocks must share a column count"));
        }
        let rows = blocks.iter().map(|b| b.rows()).sum();
        Ok(Self { blocks, rows, cols })
    }
}

impl LinearOperator for StackedOperator {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Composite
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let mut offset = 0;
        for b in &self.blocks {
            let r = b.rows();
            b.apply_into(v, &mut out[offset..offset + r]);
            offset += r;
        }
    }

    fn apply_transpose_into(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut tmp = vec![0.0; self.cols];
        let mut offset = 0;
        for b in &self.blocks {
            let r = b.rows();
            b.apply_transpose_into(&u[offset..offset + r], &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += t;
            }
            offset += r;
        }
    }
}

/// Densify any operator column by column (test-scale only).
pub fn to_dense(op: &dyn LinearOperator) -> DMatrix<f64> {
    let (m, n) = (op.rows(), op.cols());
    let mut dense = DMatrix::zeros(m, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        e[j] = 1.0;
        op.apply_into(&e, &mut col);
        dense.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    dense
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecops::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn adjoint_gap(op: &dyn LinearOperator, rng: &mut ChaCha8Rng) -> f64 {
        let v: Vec<f64> = (0..op.cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..op.rows()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = dot(&u, &op.apply(&v));
        let rhs = dot(&op.apply_transpose(&u), &v);
        let scale = 1.0 + crate::vecops::norm2(&u) * crate::vecops::norm2(&v);
        (lhs - rhs).abs() / scale
    }

    #[test]
    fn dense_adjoint_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(7, 4, |i, j| (i as f64 + 1.0) * 0.3 - j as f64);
        for _ in 0..100 {
            assert!(adjoint_gap(&a, &mut rng) <= 1e-12);
        }
    }

    #[test]
    fn stacked_adjoint_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DMatrix::from_fn(3, 5, |i, j| (i * j) as f64 - 1.5);
        let b = make_difference_operator(5, 1).unwrap();
        let stacked = StackedOperator::new(vec![Box::new(a), Box::new(b)]).unwrap();
        assert_eq!(stacked.rows(), 7);
        for _ in 0..100 {
            assert!(adjoint_gap(&stacked, &mut rng) <= 1e-12);
        }
    }

    #[test]
    fn stacked_rejects_mismatched_columns() {
        let a = DMatrix::<f64>::zeros(2, 3);
        let b = DMatrix::<f64>::zeros(2, 4);
        assert!(StackedOperator::new(vec![Box::new(a), Box::new(b)]).is_err());
    }
}
