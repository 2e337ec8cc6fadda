use super::{merge_split, split_signed};
use crate::ippmm::{ConvexProgram, QuadraticObjective};
use crate::linops::{make_tv_operator, CscMatrix, LinearOperator, Triplets};
use crate::vecops::norm1;
use crate::{Error, Result};
use nalgebra::DMatrix;

/// `min (1/2s)‖Dw − ŷ‖² + τ₁‖w‖₁ + τ₂‖Lw‖₁` with `L` the anisotropic TV of
/// a voxel grid.
#[derive(Debug, Clone)]
pub struct FusedLassoLsInstance {
    /// Samples as rows, `s × q`.
    pub data: DMatrix<f64>,
    pub labels: Vec<f64>,
    pub grid: Vec<usize>,
    pub tau1: f64,
    pub tau2: f64,
}

impl FusedLassoLsInstance {
    pub fn new(data: DMatrix<f64>, labels: Vec<f64>, grid: Vec<usize>, tau1: f64, tau2: f64) -> Result<Self> {
        let inst = Self {
            data,
            labels,
            grid,
            tau1,
            tau2,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let q: usize = self.grid.iter().product();
        if self.data.ncols() != q {
            return Err(Error::dims(format!(
                "data has {} columns but the grid {:?} has {q} voxels",
                self.data.ncols(),
                self.grid
            )));
        }
        if self.labels.len() != self.data.nrows() {
            return Err(Error::dims("one label per sample required"));
        }
        if self.labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::invalid("labels must be ±1"));
        }
        if self.tau1 < 0.0 || self.tau2 < 0.0 {
            return Err(Error::invalid("regularization weights must be non-negative"));
        }
        make_tv_operator(&self.grid)?;
        Ok(())
    }

    pub fn samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn voxels(&self) -> usize {
        self.data.ncols()
    }

    pub fn tv(&self) -> CscMatrix {
        make_tv_operator(&self.grid).expect("validated grid").into_matrix()
    }

    /// Number of TV rows `l`.
    pub fn tv_rows(&self) -> usize {
        let q = self.voxels();
        self.grid.iter().map(|&d| q / d * (d - 1)).sum()
    }

    pub fn objective(&self, w: &[f64]) -> f64 {
        let s = self.samples() as f64;
        let r = self.data.apply(w);
        let fit: f64 = r.iter().zip(&self.labels).map(|(a, y)| (a - y) * (a - y)).sum();
        fit / (2.0 * s) + self.tau1 * norm1(w) + self.tau2 * norm1(&self.tv().apply(w))
    }

    /// Constant dropped by the split objective: `‖ŷ‖² / (2s)`.
    pub fn objective_offset(&self) -> f64 {
        self.labels.iter().map(|y| y * y).sum::<f64>() / (2.0 * self.samples() as f64)
    }

    /// `x = [Dw; w⁺; w⁻; d⁺; d⁻]` for weights `w`.
    pub fn lift(&self, w: &[f64]) -> Vec<f64> {
        let (wp, wm) = split_signed(w);
        let (dp, dm) = split_signed(&self.tv().apply(w));
        [self.data.apply(w), wp, wm, dp, dm].concat()
    }

    pub fn weights(&self, x: &[f64]) -> Vec<f64> {
        merge_split(x, self.samples(), self.voxels())
    }
}

/// `x = [u; w⁺; w⁻; d⁺; d⁻]`, u free; `Q = (1/s)I ⊕ 0`;
/// `A = [[−I, D, −D, 0, 0], [0, L, −L, −I, I]]`, `b = 0`. The first `s`
/// rows form the dense block of the normal equations.
pub fn build_fused_lasso_ls(inst: &FusedLassoLsInstance) -> Result<ConvexProgram> {
    inst.validate()?;
    let (s, q) = (inst.samples(), inst.voxels());
    let tv = inst.tv();
    let l = tv.nrows();
    let n = s + 2 * q + 2 * l;
    let m = s + l;

    let d = CscMatrix::from_dense(&inst.data);
    let mut a = Triplets::with_capacity(m, n, s + 2 * d.nnz() + 2 * tv.nnz() + 2 * l);
    for i in 0..s {
        a.push(i, i, -1.0);
    }
    a.push_block(0, s, &d, 1.0);
    a.push_block(0, s + q, &d, -1.0);
    a.push_block(s, s, &tv, 1.0);
    a.push_block(s, s + q, &tv, -1.0);
    for k in 0..l {
        a.push(s + k, s + 2 * q + k, -1.0);
        a.push(s + k, s + 2 * q + l + k, 1.0);
    }

    let mut qdiag = vec![0.0; n];
    qdiag[..s].fill(1.0 / s as f64);
    let mut c: Vec<f64> = inst.labels.iter().map(|y| -y / s as f64).collect();
    c.extend(std::iter::repeat_n(inst.tau1, 2 * q));
    c.extend(std::iter::repeat_n(inst.tau2, 2 * l));
    let obj = QuadraticObjective::new(CscMatrix::from_diagonal(&qdiag), c)?;
    let nonneg = (0..n).map(|j| j >= s).collect();
    let mut p = ConvexProgram::new(a.to_csc(), vec![0.0; m], nonneg, Box::new(obj))?;
    p.block_split = Some(s);
    Ok(p)
}
