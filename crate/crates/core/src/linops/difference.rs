use super::{CscMatrix, LinearOperator, OperatorKind, Triplets};
use crate::{Error, Result};

/// Forward-difference operator over a chain or a 1-3D grid.
///
/// Rows crossing the boundary are not emitted, so each axis contributes
/// `(q_k - 1) * prod(other dims)` rows. The explicit matrix is kept because
/// the Newton systems need its sparsity pattern.
#[derive(Debug, Clone)]
pub struct DifferenceOperator {
    dims: Vec<usize>,
    matrix: CscMatrix,
}

impl DifferenceOperator {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &CscMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CscMatrix {
        self.matrix
    }
}

/// Fused-lasso difference operator for `m` periods of `s` assets.
///
/// Variables are ordered period-major (`w_j^i` at column `j*s + i`); row
/// `j*s + i` computes `w_{j+1}^i - w_j^i`.
pub fn make_difference_operator(num_periods: usize, num_assets: usize) -> Result<DifferenceOperator> {
    if num_periods < 2 {
        return Err(Error::invalid(format!(
            "difference operator needs at least 2 periods, got {num_periods}"
        )));
    }
    if num_assets < 1 {
        return Err(Error::invalid("difference operator needs at least 1 asset"));
    }
    let (m, s) = (num_periods, num_assets);
    let mut t = Triplets::with_capacity((m - 1) * s, m * s, 2 * (m - 1) * s);
    for j in 0..m - 1 {
        for i in 0..s {
            let row = j * s + i;
            t.push(row, j * s + i, -1.0);
            t.push(row, (j + 1) * s + i, 1.0);
        }
    }
    Ok(DifferenceOperator {
        dims: vec![m, s],
        matrix: t.to_csc(),
    })
}

/// Anisotropic TV operator on a row-major grid of 1 to 3 dimensions.
///
/// The last index varies fastest. Blocks are stacked axis by axis
/// (`[L_0; L_1; L_2]`).
pub fn make_tv_operator(dims: &[usize]) -> Result<DifferenceOperator> {
    if dims.is_empty() || dims.len() > 3 {
        return Err(Error::invalid(format!(
            "TV operator supports 1 to 3 dimensions, got {}",
            dims.len()
        )));
    }
    if let Some(&q) = dims.iter().find(|&&q| q < 2) {
        return Err(Error::invalid(format!("grid dimension {q} is below 2")));
    }
    let n: usize = dims.iter().product();
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len() - 1).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let rows: usize = (0..dims.len()).map(|k| n / dims[k] * (dims[k] - 1)).sum();
    let mut t = Triplets::with_capacity(rows, n, 2 * rows);
    let mut row = 0;
    for axis in 0..dims.len() {
        for idx in 0..n {
            let coord = (idx / strides[axis]) % dims[axis];
            if coord + 1 < dims[axis] {
                t.push(row, idx, -1.0);
                t.push(row, idx + strides[axis], 1.0);
                row += 1;
            }
        }
    }
    debug_assert_eq!(row, rows);
    Ok(DifferenceOperator {
        dims: dims.to_vec(),
        matrix: t.to_csc(),
    })
}

impl LinearOperator for DifferenceOperator {
    fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::StackedDifference
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.matrix.apply_into(v, out)
    }

    fn apply_transpose_into(&self, u: &[f64], out: &mut [f64]) {
        self.matrix.apply_transpose_into(u, out)
    }
}
