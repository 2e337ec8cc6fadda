use crate::precond::HtildeChoice;
use crate::{Error, Result};
use serde::Serialize;
use std::str::FromStr;

/// How each Newton system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearSolverKind {
    /// Sparse LDLᵀ of the quasi-definite augmented matrix.
    DirectAugmented,
    /// PCG on the normal equations (diagonal Hessians only).
    PcgNormal,
    /// Preconditioned MINRES on the augmented system.
    MinresAugmented,
}

impl FromStr for LinearSolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct-augmented" | "direct" => Ok(Self::DirectAugmented),
            "pcg-normal" | "pcg" => Ok(Self::PcgNormal),
            "minres-augmented" | "minres" => Ok(Self::MinresAugmented),
            _ => Err(Error::invalid(format!("unknown linear solver '{s}'"))),
        }
    }
}

/// Preconditioner for the iterative paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreconditionerKind {
    Identity,
    /// Diagonal of the normal-equations matrix.
    Jacobi,
    /// Two-block normal-equations preconditioner; the split is taken from
    /// the program.
    FmriBlockNormal,
    AugBlockDiagonal(HtildeChoice),
}

impl FromStr for PreconditionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "none" => Ok(Self::Identity),
            "jacobi" => Ok(Self::Jacobi),
            "fmri-block-normal" => Ok(Self::FmriBlockNormal),
            "aug-block-diagonal" | "aug-block-diagonal:u-squared" => {
                Ok(Self::AugBlockDiagonal(HtildeChoice::USquared))
            }
            "aug-block-diagonal:diag-h" => Ok(Self::AugBlockDiagonal(HtildeChoice::DiagH)),
            _ => Err(Error::invalid(format!("unknown preconditioner '{s}'"))),
        }
    }
}

/// IP-PMM settings. `Default` gives the direct solver without dropping.
#[derive(Debug, Clone, Serialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub linear_solver: LinearSolverKind,
    pub preconditioner: PreconditionerKind,
    pub dropping: bool,
    pub eps_drop: f64,
    pub xi: f64,
    /// Dropping starts once μ ≤ drop_activation · μ₀.
    pub drop_activation: f64,
    pub rho_floor: f64,
    pub delta_floor: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub boundary_fraction: f64,
    /// (ζ, η) move to (x, y) when both residual norms fall to this factor
    /// of their values at the previous move (or when the proximal term has
    /// gone stale, see `update_penalties_and_estimates`).
    pub estimate_decrease: f64,
    /// Inner tolerance; `None` selects the per-solver default.
    pub inner_tol: Option<f64>,
    pub inner_maxit: Option<usize>,
    /// Wall-clock limit in seconds.
    pub time_budget: Option<f64>,
    /// Abort on `x_I <= 0` after a step (always true outside tests).
    pub check_positivity: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
            linear_solver: LinearSolverKind::DirectAugmented,
            preconditioner: PreconditionerKind::Identity,
            dropping: false,
            eps_drop: 1e-4,
            xi: 1e2,
            drop_activation: 1e-2,
            rho_floor: 1e-8,
            delta_floor: 1e-8,
            sigma_min: 0.05,
            sigma_max: 0.95,
            boundary_fraction: 0.995,
            estimate_decrease: 0.95,
            inner_tol: None,
            inner_maxit: None,
            time_budget: None,
            check_positivity: true,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::invalid(format!("bad value '{value}' for '{key}'"))),
    }
}

impl SolverOptions {
    /// Sets one option from its textual `key = value` form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "tol" => self.tol = parse_num(key, value)?,
            "max_iter" | "max-iter" | "iters" => self.max_iter = parse_num(key, value)?,
            "linear_solver" | "solver" => self.linear_solver = value.parse()?,
            "preconditioner" => self.preconditioner = value.parse()?,
            "dropping" => self.dropping = parse_bool(key, value)?,
            "eps_drop" => self.eps_drop = parse_num(key, value)?,
            "xi" => self.xi = parse_num(key, value)?,
            "drop_activation" => self.drop_activation = parse_num(key, value)?,
            "rho_floor" => self.rho_floor = parse_num(key, value)?,
            "delta_floor" => self.delta_floor = parse_num(key, value)?,
            "sigma_min" => self.sigma_min = parse_num(key, value)?,
            "sigma_max" => self.sigma_max = parse_num(key, value)?,
            "boundary_fraction" => self.boundary_fraction = parse_num(key, value)?,
            "estimate_decrease" => self.estimate_decrease = parse_num(key, value)?,
            "inner_tol" => self.inner_tol = Some(parse_num(key, value)?),
            "inner_maxit" => self.inner_maxit = Some(parse_num(key, value)?),
            "time_budget" | "budget_seconds" => self.time_budget = Some(parse_num(key, value)?),
            _ => return Err(Error::invalid(format!("unknown solver option '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol", self.tol),
            ("eps_drop", self.eps_drop),
            ("xi", self.xi),
            ("rho_floor", self.rho_floor),
            ("delta_floor", self.delta_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if !(0.0 < self.sigma_min && self.sigma_min <= self.sigma_max && self.sigma_max < 1.0) {
            return Err(Error::invalid("need 0 < sigma_min <= sigma_max < 1"));
        }
        if !(0.0 < self.boundary_fraction && self.boundary_fraction < 1.0) {
            return Err(Error::invalid("boundary_fraction must lie in (0, 1)"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}
