use super::newton::{timed, Direction, LinearSolverHandle, NewtonMatrix, NewtonRhs};
use super::options::{LinearSolverKind, SolverOptions};
use super::report::{History, PhaseTimes, SolveReport, Status};
use super::state::{IpPmmState, Residuals};
use super::ConvexProgram;
use crate::dropping::{scan_and_drop, verify_dropped, DropAudit};
use crate::Result;
use std::time::Instant;

/// Primal-dual triple on the original index range.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

/// Scaled residuals and the optimality verdict (inclusive comparisons).
#[derive(Debug, Clone, Copy)]
pub struct Termination {
    pub optimal: bool,
    pub primal_inf: f64,
    pub dual_inf: f64,
    pub mu: f64,
}

pub fn check_termination(state: &IpPmmState, program: &ConvexProgram, tol: f64) -> Termination {
    let r = state.residuals(program);
    termination_from(&r, state.mu, tol)
}

fn termination_from(r: &Residuals, mu: f64, tol: f64) -> Termination {
    let (p, d) = (r.primal_scaled(), r.dual_scaled());
    Termination {
        optimal: p <= tol && d <= tol && mu <= tol,
        primal_inf: p,
        dual_inf: d,
        mu,
    }
}

/// Largest `α ≤ 1` with `v + α·dv` kept at `fraction` of the way to the
/// boundary. Entries with `mask[k] == false` are unconstrained.
pub fn fraction_to_boundary(v: &[f64], dv: &[f64], mask: &[bool], fraction: f64) -> f64 {
    let mut max_step = f64::INFINITY;
    for k in 0..v.len() {
        if mask[k] && dv[k] < 0.0 {
            max_step = max_step.min(-v[k] / dv[k]);
        }
    }
    (fraction * max_step).min(1.0)
}

/// (α_primal, α_dual) by the fraction-to-the-boundary rule over I \ V.
pub fn step_lengths(state: &IpPmmState, program: &ConvexProgram, dir: &Direction, fraction: f64) -> (f64, f64) {
    let mask: Vec<bool> = (0..state.x.len())
        .map(|j| program.nonneg[j] && !state.is_dropped(j))
        .collect();
    (
        fraction_to_boundary(&state.x, &dir.dx, &mask, fraction),
        fraction_to_boundary(&state.z, &dir.dz, &mask, fraction),
    )
}

fn expand(active: &[usize], v: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (k, &j) in active.iter().enumerate() {
        out[j] = v[k];
    }
    out
}

/// Mehrotra predictor-corrector direction: an affine solve (σ = 0), then a
/// combined corrector solve with σ = clamp((μ_aff/μ)³) and the second-order
/// term, both with the same matrix.
pub fn predictor_corrector_step(
    state: &IpPmmState,
    program: &ConvexProgram,
    handle: &mut LinearSolverHandle,
    options: &SolverOptions,
) -> Result<Direction> {
    let (mut t_asm, mut t_fac, mut t_sol) = (0.0, 0.0, 0.0);
    let want_explicit = handle.kind() == LinearSolverKind::DirectAugmented;
    let (mat, res) = timed(&mut t_asm, || {
        NewtonMatrix::new(state, program, want_explicit).map(|m| (m, state.residuals(program)))
    })?;
    let prepared = timed(&mut t_fac, || handle.prepare(&mat))?;
    let active = mat.active().to_vec();
    let ng = active.len();

    let rhs_aff = timed(&mut t_asm, || NewtonRhs::new(state, program, &active, &res, 0.0, None));
    let aff = timed(&mut t_sol, || handle.solve(&prepared, &mat, &rhs_aff));
    let dz_aff = rhs_aff.recover_dz(&aff.dx);

    let mask: Vec<bool> = active.iter().map(|&j| program.nonneg[j]).collect();
    let xg: Vec<f64> = active.iter().map(|&j| state.x[j]).collect();
    let zg: Vec<f64> = active.iter().map(|&j| state.z[j]).collect();
    let ap = fraction_to_boundary(&xg, &aff.dx, &mask, options.boundary_fraction);
    let ad = fraction_to_boundary(&zg, &dz_aff, &mask, options.boundary_fraction);
    let count = mask.iter().filter(|&&b| b).count();
    let sigma = if count == 0 || state.mu <= 0.0 {
        options.sigma_min
    } else {
        let mu_aff: f64 = (0..ng)
            .filter(|&k| mask[k])
            .map(|k| (xg[k] + ap * aff.dx[k]) * (zg[k] + ad * dz_aff[k]))
            .sum::<f64>()
            / count as f64;
        (mu_aff / state.mu).powi(3).clamp(options.sigma_min, options.sigma_max)
    };

    let rhs = timed(&mut t_asm, || {
        NewtonRhs::new(state, program, &active, &res, sigma, Some((&aff.dx, &dz_aff)))
    });
    let cor = timed(&mut t_sol, || handle.solve(&prepared, &mat, &rhs));
    let dz = rhs.recover_dz(&cor.dx);
    let n = program.n();
    Ok(Direction {
        dx: expand(&active, &cor.dx, n),
        dy: cor.dy,
        dz: expand(&active, &dz, n),
        sigma,
        inner_iters: aff.iterations + cor.iterations,
        inexact: !aff.converged || !cor.converged,
        assembly_time: t_asm,
        factor_time: t_fac,
        solve_time: t_sol,
    })
}

/// Recomputes μ, shrinks ρ and δ with μ (never increasing them, never
/// below the floors), and moves (ζ, η) to (x, y) on sufficient decrease of
/// both residual norms. `mu_old` is μ before the step.
pub fn update_penalties_and_estimates(
    state: &mut IpPmmState,
    program: &ConvexProgram,
    res: &Residuals,
    mu_old: f64,
    options: &SolverOptions,
) {
    state.mu = state.complementarity(program);
    let ratio = if mu_old > 0.0 {
        (state.mu / mu_old).min(1.0)
    } else {
        1.0
    };
    state.rho = (state.rho * ratio).max(options.rho_floor);
    state.delta = (state.delta * ratio).max(options.delta_floor);
    let f = options.estimate_decrease;
    let decreased = res.primal_norm <= f * state.estimate_primal && res.dual_norm <= f * state.estimate_dual;
    if decreased || proximal_subproblem_solved(state, res) {
        state.zeta.copy_from_slice(&state.x);
        state.eta.copy_from_slice(&state.y);
        state.estimate_primal = res.primal_norm;
        state.estimate_dual = res.dual_norm;
    }
}

/// The estimates are stale when the regularized residuals `dual + ρ(x − ζ)`
/// and `primal − δ(y − η)` are either an order of magnitude below the true
/// ones (the proximal point is reached) or well above them (the proximal term
/// pulls the iterate away from optimality).
fn proximal_subproblem_solved(state: &IpPmmState, res: &Residuals) -> bool {
    let true_norm = res.primal_norm + res.dual_norm;
    if !(true_norm > 0.0) {
        return false;
    }
    let reg_dual: f64 = (0..state.x.len())
        .filter(|&j| !state.is_dropped(j))
        .map(|j| {
            let r = res.dual[j] + state.rho * (state.x[j] - state.zeta[j]);
            r * r
        })
        .sum::<f64>()
        .sqrt();
    let reg_primal: f64 = (0..state.y.len())
        .map(|i| {
            let r = res.primal[i] - state.delta * (state.y[i] - state.eta[i]);
            r * r
        })
        .sum::<f64>()
        .sqrt();
    let reg = reg_dual + reg_primal;
    reg <= 0.1 * true_norm || reg >= 2.0 * true_norm
}

fn positivity_violation(state: &IpPmmState, program: &ConvexProgram) -> Option<usize> {
    (0..state.x.len()).find(|&j| {
        program.nonneg[j] && !state.is_dropped(j) && !(state.x[j] > 0.0 && state.z[j] > 0.0)
    })
}

/// Runs IP-PMM to the tolerance in `options`. Errors are returned only for
/// malformed input; numerical trouble is reported through the status.
pub fn solve(program: &ConvexProgram, options: &SolverOptions) -> Result<(Solution, SolveReport)> {
    program.validate()?;
    options.validate()?;
    let clock = Instant::now();
    let mut times = PhaseTimes::default();
    let mut history = History::default();
    let mut state = IpPmmState::initial(program, options.rho_floor, options.delta_floor);
    let mu0 = state.mu;
    let mut handle = LinearSolverHandle::new(options, program);
    let mut inner_total = 0;
    let mut inexact = 0;
    let mut message = None;
    let mut status = Status::MaxIterations;
    let initial_active = program.n();

    let mut res = state.residuals(program);
    let mut term = termination_from(&res, state.mu, options.tol);
    history.primal_inf.push(term.primal_inf);
    history.dual_inf.push(term.dual_inf);
    history.mu.push(state.mu);
    history.active_columns.push(initial_active);

    loop {
        if term.optimal {
            status = Status::Optimal;
            break;
        }
        if state.k >= options.max_iter {
            break;
        }
        if let Some(budget) = options.time_budget {
            if clock.elapsed().as_secs_f64() >= budget {
                message = Some("time budget exhausted".into());
                break;
            }
        }
        let dir = match predictor_corrector_step(&state, program, &mut handle, options) {
            Ok(d) => d,
            Err(e) => {
                status = Status::NumericalFailure;
                message = Some(format!("Newton system failed at iteration {}: {e}", state.k));
                break;
            }
        };
        times.assembly += dir.assembly_time;
        times.factorization += dir.factor_time;
        times.solve += dir.solve_time;
        inner_total += dir.inner_iters;
        if dir.inexact {
            inexact += 1;
        }
        let t_other = Instant::now();
        let finite = dir.dx.iter().chain(&dir.dy).chain(&dir.dz).all(|v| v.is_finite());
        if !finite {
            status = Status::NumericalFailure;
            message = Some(format!("non-finite search direction at iteration {}", state.k));
            break;
        }
        let (ap, ad) = step_lengths(&state, program, &dir, options.boundary_fraction);
        for j in 0..state.x.len() {
            if !state.is_dropped(j) {
                state.x[j] += ap * dir.dx[j];
                state.z[j] += ad * dir.dz[j];
            }
        }
        for (y, dy) in state.y.iter_mut().zip(&dir.dy) {
            *y += ad * dy;
        }
        state.k += 1;
        if options.check_positivity {
            if let Some(j) = positivity_violation(&state, program) {
                status = Status::NumericalFailure;
                message = Some(format!("positivity lost at variable {j}, iteration {}", state.k));
                break;
            }
        }
        if !program.objective.in_domain(&state.x) {
            status = Status::NumericalFailure;
            message = Some(format!("iterate left the objective domain at iteration {}", state.k));
            break;
        }
        let mu_old = state.mu;
        res = state.residuals(program);
        update_penalties_and_estimates(&mut state, program, &res, mu_old, options);
        if options.dropping && state.mu <= options.drop_activation * mu0 {
            let newly = scan_and_drop(&mut state, program, &res.dual, options.eps_drop, options.xi);
            if !newly.is_empty() {
                state.mu = state.complementarity(program);
                res = state.residuals(program);
            }
        }
        term = termination_from(&res, state.mu, options.tol);
        history.primal_inf.push(term.primal_inf);
        history.dual_inf.push(term.dual_inf);
        history.mu.push(state.mu);
        history.inner_iters.push(dir.inner_iters);
        history.alpha_primal.push(ap);
        history.alpha_dual.push(ad);
        history.active_columns.push(program.n() - state.dropped.len());
        times.other += t_other.elapsed().as_secs_f64();
    }

    let drop_audit = if state.dropped.is_empty() {
        DropAudit::default()
    } else {
        let audit = verify_dropped(&state.x, &state.y, program, &state.dropped);
        for d in &audit.dropped {
            state.z[d.index] = d.multiplier;
        }
        if !audit.violated.is_empty() {
            status = Status::NumericalFailure;
            message = Some(format!("dropped variables with non-positive multipliers: {:?}", audit.violated));
        }
        audit
    };

    let report = SolveReport {
        status,
        iters: state.k,
        primal_inf: term.primal_inf,
        dual_inf: term.dual_inf,
        mu: state.mu,
        time_s: clock.elapsed().as_secs_f64(),
        inner_iters: inner_total,
        objective: program.objective.value(&state.x),
        linear_solver: format!("{:?}", options.linear_solver),
        inexact_directions: inexact,
        initial_active,
        final_active: program.n() - state.dropped.len(),
        phase_times: times,
        history,
        drop_audit,
        message,
    };
    Ok((
        Solution {
            x: state.x,
            y: state.y,
            z: state.z,
        },
        report,
    ))
}
