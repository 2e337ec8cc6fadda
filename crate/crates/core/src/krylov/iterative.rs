use super::{KrylovOutcome, Preconditioner};
use crate::linops::LinearOperator;
use crate::vecops::{axpy, dot};

fn zero_outcome(n: usize) -> KrylovOutcome {
    KrylovOutcome {
        solution: vec![0.0; n],
        iterations: 0,
        final_relative_residual: 0.0,
        converged: true,
        breakdown: None,
        residual_history: vec![0.0],
    }
}

/// Preconditioned conjugate gradients from a zero initial guess.
///
/// Stops when `sqrt(rᵀP⁻¹r) <= tol * sqrt(bᵀP⁻¹b)`. A non-positive
/// curvature `pᵀMp` or a negative `rᵀP⁻¹r` ends the run with a breakdown
/// tag and the current iterate.
pub fn pcg(
    m: &dyn LinearOperator,
    rhs: &[f64],
    p: &dyn Preconditioner,
    tol: f64,
    maxit: usize,
) -> KrylovOutcome {
    let n = rhs.len();
    assert_eq!(m.rows(), n);
    assert_eq!(p.dim(), n);
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z = vec![0.0; n];
    p.apply_inverse(&r, &mut z);
    let mut rz = dot(&r, &z);
    if rz < 0.0 || !rz.is_finite() {
        let mut out = zero_outcome(n);
        out.converged = false;
        out.final_relative_residual = 1.0;
        out.residual_history = vec![1.0];
        out.breakdown = Some("preconditioner is not positive definite".into());
        return out;
    }
    if rz == 0.0 {
        return zero_outcome(n);
    }
    let bnorm = rz.sqrt();
    let mut dir = z.clone();
    let mut q = vec![0.0; n];
    let mut history = vec![1.0];
    let mut rel = 1.0;
    let mut converged = false;
    let mut breakdown = None;
    let mut iterations = 0;
    while iterations < maxit {
        m.apply_into(&dir, &mut q);
        let curv = dot(&dir, &q);
        if !(curv > 0.0) || !curv.is_finite() {
            breakdown = Some("non-positive curvature pᵀMp".to_string());
            break;
        }
        let alpha = rz / curv;
        axpy(alpha, &dir, &mut x);
        axpy(-alpha, &q, &mut r);
        p.apply_inverse(&r, &mut z);
        let rz_new = dot(&r, &z);
        iterations += 1;
        if rz_new < 0.0 || !rz_new.is_finite() {
            breakdown = Some("preconditioner is not positive definite".to_string());
            break;
        }
        rel = rz_new.sqrt() / bnorm;
        history.push(rel);
        if rel <= tol {
            converged = true;
            break;
        }
        let beta = rz_new / rz;
        for (d, zi) in dir.iter_mut().zip(&z) {
            *d = zi + beta * *d;
        }
        rz = rz_new;
    }
    KrylovOutcome {
        solution: x,
        iterations,
        final_relative_residual: rel,
        converged,
        breakdown,
        residual_history: history,
    }
}

/// Preconditioned MINRES (Paige-Saunders) from a zero initial guess, for
/// symmetric, possibly indefinite `M` and SPD `P`.
///
/// The reported residual is `‖r‖_{P⁻¹} / ‖b‖_{P⁻¹}`, which is monotone
/// non-increasing.
pub fn minres(
    m: &dyn LinearOperator,
    rhs: &[f64],
    p: &dyn Preconditioner,
    tol: f64,
    maxit: usize,
) -> KrylovOutcome {
    let n = rhs.len();
    assert_eq!(m.rows(), n);
    assert_eq!(p.dim(), n);
    let mut x = vec![0.0; n];
    let mut r1 = rhs.to_vec();
    let mut y = vec![0.0; n];
    p.apply_inverse(&r1, &mut y);
    let beta1_sq = dot(&r1, &y);
    if beta1_sq < 0.0 || !beta1_sq.is_finite() {
        let mut out = zero_outcome(n);
        out.converged = false;
        out.final_relative_residual = 1.0;
        out.residual_history = vec![1.0];
        out.breakdown = Some("preconditioner is not positive definite".into());
        return out;
    }
    if beta1_sq == 0.0 {
        return zero_outcome(n);
    }
    let beta1 = beta1_sq.sqrt();
    let mut r2 = r1.clone();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let (mut oldb, mut beta) = (0.0f64, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0f64, 0.0f64, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut history = vec![1.0];
    let mut rel = 1.0;
    let mut converged = false;
    let mut breakdown = None;
    let mut iterations = 0;
    while iterations < maxit {
        iterations += 1;
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        m.apply_into(&v, &mut y);
        if iterations >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        p.apply_inverse(&r2, &mut y);
        oldb = beta;
        let beta_sq = dot(&r2, &y);
        if beta_sq < 0.0 || !beta_sq.is_finite() {
            breakdown = Some("preconditioner is not positive definite".to_string());
            iterations -= 1;
            break;
        }
        beta = beta_sq.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        let denom = 1.0 / gamma;
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
        }
        axpy(phi, &w, &mut x);

        rel = phibar.abs() / beta1;
        history.push(rel);
        if rel <= tol {
            converged = true;
            break;
        }
        if beta == 0.0 {
            // invariant subspace reached; the estimate above is exact
            break;
        }
    }
    KrylovOutcome {
        solution: x,
        iterations,
        final_relative_residual: rel,
        converged,
        breakdown,
        residual_history: history,
    }
}
