//! Variable dropping: non-negative variables that have settled at zero
//! (small x, dual slack bounded away from zero, small dual residual) are
//! removed from the working problem for the rest of the solve. After the
//! solve their multipliers are recomputed and checked for sign.

use crate::ippmm::{ConvexProgram, IpPmmState};
use crate::linops::LinearOperator;
use crate::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedVariable {
    pub index: usize,
    pub iteration: usize,
    /// z_j = (∇f(x*) − Aᵀy*)_j at the final iterate.
    pub multiplier: f64,
}

/// Post-solve check of the dropped set. `violated ⊆ dropped`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DropAudit {
    pub dropped: Vec<DroppedVariable>,
    pub violated: Vec<usize>,
}

impl DropAudit {
    pub fn is_clean(&self) -> bool {
        self.violated.is_empty()
    }
}

/// Moves every j ∈ I \ V with `x_j <= eps`, `z_j >= xi·eps` and
/// `|dual_j| <= eps` into V, zeroing x_j and z_j. Returns the new indices.
pub fn scan_and_drop(
    state: &mut IpPmmState,
    program: &ConvexProgram,
    dual_residual: &[f64],
    eps_drop: f64,
    xi: f64,
) -> Vec<usize> {
    let hits: Vec<usize> = (0..state.x.len())
        .filter(|&j| {
            program.nonneg[j]
                && !state.is_dropped(j)
                && state.x[j] <= eps_drop
                && state.z[j] >= xi * eps_drop
                && dual_residual[j].abs() <= eps_drop
        })
        .collect();
    for &j in &hits {
        state.mark_dropped(j);
    }
    hits
}

/// Recomputes z_V = (∇f(x) − Aᵀy)_V at the expanded solution and flags
/// entries that are not strictly positive.
pub fn verify_dropped(x: &[f64], y: &[f64], program: &ConvexProgram, dropped: &[(usize, usize)]) -> DropAudit {
    if dropped.is_empty() {
        return DropAudit::default();
    }
    let grad = program.objective.gradient(x);
    let aty = program.a.apply_transpose(y);
    let mut audit = DropAudit::default();
    for &(j, it) in dropped {
        let zj = grad[j] - aty[j];
        if zj <= 0.0 {
            audit.violated.push(j);
        }
        audit.dropped.push(DroppedVariable {
            index: j,
            iteration: it,
            multiplier: zj,
        });
    }
    audit
}

fn dropped_mask(dropped: &[usize], n: usize) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    for &j in dropped {
        if j >= n {
            return Err(Error::invalid(format!("dropped index {j} out of range for n = {n}")));
        }
        if std::mem::replace(&mut mask[j], true) {
            return Err(Error::invalid(format!("dropped index {j} listed twice")));
        }
    }
    Ok(mask)
}

/// Scatters `reduced` (values on G, increasing order) into a length-`n`
/// vector with zeros on `dropped`.
pub fn expand_solution(reduced: &[f64], dropped: &[usize], n: usize) -> Result<Vec<f64>> {
    let mask = dropped_mask(dropped, n)?;
    if reduced.len() + dropped.len() != n {
        return Err(Error::invalid(format!(
            "{} kept + {} dropped entries do not make n = {n}",
            reduced.len(),
            dropped.len()
        )));
    }
    let mut it = reduced.iter();
    Ok(mask
        .iter()
        .map(|&d| if d { 0.0 } else { *it.next().expect("length checked") })
        .collect())
}

/// Inverse of [`expand_solution`] on G.
pub fn restrict_solution(full: &[f64], dropped: &[usize]) -> Result<Vec<f64>> {
    let mask = dropped_mask(dropped, full.len())?;
    Ok(full.iter().zip(&mask).filter(|(_, &d)| !d).map(|(v, _)| *v).collect())
}
