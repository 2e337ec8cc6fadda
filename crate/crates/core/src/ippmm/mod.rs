//! Interior point-proximal method of multipliers for
//!
//! ```text
//! min f(x)  s.t.  A x = b,  x_I >= 0,  x_F free
//! ```
//!
//! Each iteration takes one predictor-corrector Newton step on the
//! proximally regularized KKT conditions. The Newton system is solved in
//! augmented form (direct LDLᵀ or MINRES) or, for diagonal Hessians, in
//! normal-equations form with PCG.

mod newton;
mod options;
mod report;
mod solver;
mod state;

pub use newton::{
    assemble_augmented_system, assemble_normal_equations, Direction, LinearSolverHandle, NewtonMatrix,
    NewtonRhs, NormalOperator,
};
pub use options::{LinearSolverKind, PreconditionerKind, SolverOptions};
pub use report::{History, PhaseTimes, SolveReport, Status};
pub use solver::{
    check_termination, fraction_to_boundary, predictor_corrector_step, solve, step_lengths, update_penalties_and_estimates,
    Solution, Termination,
};
pub use state::{IpPmmState, Residuals};

use crate::linops::{CscMatrix, LinearOperator};
use crate::{Error, Result};

/// Sparsity class of the objective Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianStructure {
    /// ∇²f(x) is diagonal for every x; enables the normal-equations path.
    Diagonal,
    General,
}

/// Smooth convex objective oracle. Implementations must be reentrant.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian_apply(&self, x: &[f64], v: &[f64]) -> Vec<f64>;
    fn hessian_structure(&self) -> HessianStructure;

    /// Exact diagonal of ∇²f(x).
    fn hessian_diagonal(&self, x: &[f64]) -> Vec<f64>;

    /// Cheap diagonal surrogate of ∇²f(x) used by preconditioners.
    fn hessian_diagonal_approx(&self, x: &[f64]) -> Vec<f64> {
        self.hessian_diagonal(x)
    }

    /// Explicit Hessian, when affordable.
    fn hessian_matrix(&self, _x: &[f64]) -> Option<CscMatrix> {
        None
    }

    /// Whether the oracles are defined at `x`.
    fn in_domain(&self, _x: &[f64]) -> bool {
        true
    }
}

/// `f(x) = ½ xᵀQx + cᵀx` with explicit symmetric PSD `Q`.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    q: CscMatrix,
    c: Vec<f64>,
    diagonal: bool,
}

impl QuadraticObjective {
    pub fn new(q: CscMatrix, c: Vec<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() || q.ncols() != c.len() {
            return Err(Error::dims(format!(
                "Q is {}x{} but c has {} entries",
                q.nrows(),
                q.ncols(),
                c.len()
            )));
        }
        let diagonal = q.iter().all(|(i, j, v)| i == j || v == 0.0);
        Ok(Self { q, c, diagonal })
    }

    pub fn linear(c: Vec<f64>) -> Self {
        let n = c.len();
        Self {
            q: CscMatrix::zeros(n, n),
            c,
            diagonal: true,
        }
    }

    pub fn q(&self) -> &CscMatrix {
        &self.q
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let qx = self.q.apply(x);
        x.iter().zip(&qx).zip(&self.c).map(|((xi, qi), ci)| xi * (0.5 * qi + ci)).sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.q.apply(x);
        for (gi, ci) in g.iter_mut().zip(&self.c) {
            *gi += ci;
        }
        g
    }

    fn hessian_apply(&self, _x: &[f64], v: &[f64]) -> Vec<f64> {
        self.q.apply(v)
    }

    fn hessian_structure(&self) -> HessianStructure {
        if self.diagonal {
            HessianStructure::Diagonal
        } else {
            HessianStructure::General
        }
    }

    fn hessian_diagonal(&self, _x: &[f64]) -> Vec<f64> {
        self.q.diagonal()
    }

    fn hessian_matrix(&self, _x: &[f64]) -> Option<CscMatrix> {
        Some(self.q.clone())
    }
}

/// Optional user-supplied starting triple.
#[derive(Debug, Clone)]
pub struct StartPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

/// `min f(x) s.t. Ax = b, x_j >= 0 for nonneg[j]`.
pub struct ConvexProgram {
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub nonneg: Vec<bool>,
    pub objective: Box<dyn Objective>,
    pub start: Option<StartPoint>,
    /// Row count of the leading block used by the block normal-equations
    /// preconditioner (the `s` sample rows of a fused-lasso program).
    pub block_split: Option<usize>,
}

impl ConvexProgram {
    pub fn new(a: CscMatrix, b: Vec<f64>, nonneg: Vec<bool>, objective: Box<dyn Objective>) -> Result<Self> {
        let p = Self {
            a,
            b,
            nonneg,
            objective,
            start: None,
            block_split: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_start(mut self, start: StartPoint) -> Result<Self> {
        self.start = Some(start);
        self.validate()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn nonneg_count(&self) -> usize {
        self.nonneg.iter().filter(|&&b| b).count()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.m(), self.n());
        if self.b.len() != m {
            return Err(Error::dims(format!("A has {m} rows but b has {}", self.b.len())));
        }
        if self.nonneg.len() != n || self.objective.dim() != n {
            return Err(Error::dims(format!(
                "A has {n} columns, sign mask {}, objective {}",
                self.nonneg.len(),
                self.objective.dim()
            )));
        }
        if let Some(s) = &self.start {
            if s.x.len() != n || s.z.len() != n || s.y.len() != m {
                return Err(Error::dims("starting point has the wrong shape"));
            }
            for j in 0..n {
                if self.nonneg[j] && !(s.x[j] > 0.0 && s.z[j] > 0.0) {
                    return Err(Error::invalid(format!(
                        "starting point must be strictly positive on non-negative variable {j}"
                    )));
                }
            }
        }
        if let Some(split) = self.block_split {
            if split > m {
                return Err(Error::invalid("block split exceeds the row count"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
