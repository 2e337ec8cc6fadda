//! Linear solvers used inside the IP-PMM iteration.
//!
//! Direct: dense Cholesky and a sparse LDLᵀ (up-looking, with a
//! minimum-degree ordering that can be computed once and reused).
//! Iterative: preconditioned CG and preconditioned MINRES.

mod dense;
mod iterative;
mod ldl;
mod ordering;

pub use dense::DenseCholesky;
pub use iterative::{minres, pcg};
pub use ldl::{cholesky_solve, LdlFactor, LdlMode, SymbolicLdl};
pub use ordering::minimum_degree;

use serde::Serialize;

/// Apply-inverse contract of a preconditioner: `out = P⁻¹ r`.
pub trait Preconditioner: Send + Sync {
    fn dim(&self) -> usize;
    fn apply_inverse(&self, r: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityPreconditioner(pub usize);

impl Preconditioner for IdentityPreconditioner {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply_inverse(&self, r: &[f64], out: &mut [f64]) {
        out.copy_from_slice(r);
    }
}

/// Jacobi-type preconditioner `P = diag(d)`, d > 0.
#[derive(Debug, Clone)]
pub struct DiagonalPreconditioner {
    inv: Vec<f64>,
}

impl DiagonalPreconditioner {
    pub fn new(diag: &[f64]) -> crate::Result<Self> {
        if let Some(k) = diag.iter().position(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(crate::Error::invalid(format!(
                "diagonal preconditioner entry {k} is not positive ({})",
                diag[k]
            )));
        }
        Ok(Self {
            inv: diag.iter().map(|d| 1.0 / d).collect(),
        })
    }
}

impl Preconditioner for DiagonalPreconditioner {
    fn dim(&self) -> usize {
        self.inv.len()
    }

    fn apply_inverse(&self, r: &[f64], out: &mut [f64]) {
        for ((o, ri), di) in out.iter_mut().zip(r).zip(&self.inv) {
            *o = ri * di;
        }
    }
}

/// Result of one Krylov solve.
#[derive(Debug, Clone, Serialize)]
pub struct KrylovOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Preconditioned residual norm relative to the preconditioned rhs norm.
    pub final_relative_residual: f64,
    pub converged: bool,
    pub breakdown: Option<String>,
    /// Relative residual after each iteration, starting with 1 at iteration 0.
    pub residual_history: Vec<f64>,
}
