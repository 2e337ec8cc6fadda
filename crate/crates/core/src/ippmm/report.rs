use crate::dropping::DropAudit;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    MaxIterations,
    NumericalFailure,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::MaxIterations => "max-iterations",
            Status::NumericalFailure => "numerical-failure",
        }
    }
}

/// Per-iteration traces; entry 0 describes the starting point.
#[derive(Debug, Clone, Default, Serialize)]
pub struct History {
    pub primal_inf: Vec<f64>,
    pub dual_inf: Vec<f64>,
    pub mu: Vec<f64>,
    pub inner_iters: Vec<usize>,
    pub alpha_primal: Vec<f64>,
    pub alpha_dual: Vec<f64>,
    pub active_columns: Vec<usize>,
}

/// Wall time per phase, seconds.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PhaseTimes {
    pub assembly: f64,
    pub factorization: f64,
    pub solve: f64,
    pub other: f64,
}

/// Outcome of one IP-PMM run. Field names of the first block are stable.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub status: Status,
    pub iters: usize,
    /// ‖Ax − b‖ / (1 + ‖b‖)
    pub primal_inf: f64,
    /// ‖(∇f − Aᵀy − z)_G‖ / (1 + ‖∇f‖)
    pub dual_inf: f64,
    pub mu: f64,
    pub time_s: f64,
    pub inner_iters: usize,

    pub objective: f64,
    pub linear_solver: String,
    pub inexact_directions: usize,
    pub initial_active: usize,
    pub final_active: usize,
    pub phase_times: PhaseTimes,
    pub history: History,
    pub drop_audit: DropAudit,
    pub message: Option<String>,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
