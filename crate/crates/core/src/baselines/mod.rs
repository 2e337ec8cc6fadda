//! First-order reference solvers: soft-thresholding, Alternating Split
//! Bregman with a cached Cholesky factor (ASB-Chol), FISTA with an inner
//! dual proximal loop, and ADMM with inner CG.

mod admm;
mod asb;
mod fista;

pub use admm::{admm_solve, AdmmProblem};
pub use asb::{asb_chol_solve, AsbLambdas};
pub use fista::fista_solve;

use crate::linops::{LinearOperator, OperatorKind};
use serde::Serialize;
use std::time::Instant;

/// `sign(vᵢ)·max(|vᵢ| − γ, 0)`.
pub fn soft_threshold(v: &[f64], gamma: f64) -> Vec<f64> {
    assert!(gamma >= 0.0, "threshold must be non-negative");
    v.iter().map(|&x| x.signum() * (x.abs() - gamma).max(0.0)).collect()
}

/// Stopping and inner-loop controls shared by the baselines.
#[derive(Debug, Clone, Serialize)]
pub struct FirstOrderOptions {
    pub max_iter: usize,
    /// Relative primal feasibility (ASB, ADMM) or relative objective change
    /// (FISTA) at which to stop.
    pub tol: f64,
    pub time_budget_s: Option<f64>,
    /// Inner dual-FISTA steps (FISTA) or CG steps (ADMM).
    pub inner_steps: usize,
    pub rho_admm: f64,
}

impl Default for FirstOrderOptions {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-6,
            time_budget_s: None,
            inner_steps: 10,
            rho_admm: 1.0,
        }
    }
}

/// One entry per outer iteration in each history.
#[derive(Debug, Clone, Serialize)]
pub struct FirstOrderReport {
    pub solver: &'static str,
    pub iterations: usize,
    pub converged: bool,
    pub primal_feasibility: Vec<f64>,
    /// Empty for solvers without a dual residual.
    pub dual_residual: Vec<f64>,
    pub objective: Vec<f64>,
    pub time_s: f64,
    /// Matrix factorizations performed.
    pub factorizations: usize,
}

impl FirstOrderReport {
    fn new(solver: &'static str) -> Self {
        Self {
            solver,
            iterations: 0,
            converged: false,
            primal_feasibility: Vec::new(),
            dual_residual: Vec::new(),
            objective: Vec::new(),
            time_s: 0.0,
            factorizations: 0,
        }
    }

    pub fn final_objective(&self) -> f64 {
        self.objective.last().copied().unwrap_or(f64::NAN)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub(crate) struct Clock {
    start: Instant,
    budget: Option<f64>,
}

impl Clock {
    pub(crate) fn new(budget: Option<f64>) -> Self {
        Self {
            start: Instant::now(),
            budget,
        }
    }

    pub(crate) fn expired(&self) -> bool {
        self.budget.is_some_and(|b| self.elapsed() >= b)
    }

    pub(crate) fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// Symmetric operator given by a closure.
pub(crate) struct SymOp<F: Fn(&[f64]) -> Vec<f64> + Send + Sync> {
    pub n: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64> + Send + Sync> LinearOperator for SymOp<F> {
    fn rows(&self) -> usize {
        self.n
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Composite
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&(self.f)(v));
    }

    fn apply_transpose_into(&self, u: &[f64], out: &mut [f64]) {
        self.apply_into(u, out);
    }
}

/// Largest eigenvalue of `AᵀA` by power iteration.
pub(crate) fn gram_norm_sq(a: &dyn LinearOperator, iters: usize) -> f64 {
    let n = a.cols();
    let mut v: Vec<f64> = (0..n).map(|j| 1.0 + 0.01 * (j % 7) as f64).collect();
    let mut lam = 0.0;
    for _ in 0..iters {
        let nv = crate::vecops::norm2(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let w = a.apply_transpose(&a.apply(&v));
        let next = crate::vecops::dot(&v, &w);
        v = w;
        if (next - lam).abs() <= 1e-10 * next.abs() {
            return next;
        }
        lam = next;
    }
    lam
}
