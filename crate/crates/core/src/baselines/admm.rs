use super::{soft_threshold, Clock, FirstOrderOptions, FirstOrderReport, SymOp};
use crate::krylov::{pcg, IdentityPreconditioner};
use crate::linops::{CscMatrix, LinearOperator};
use crate::problems::{FusedLassoLsInstance, LogisticInstance};
use crate::vecops::{norm1, norm2};
use crate::{Error, Result};

/// Problems ADMM accepts, in their split forms.
#[derive(Debug, Clone, Copy)]
pub enum AdmmProblem<'a> {
    /// `w − u = 0`, `Lw − d = 0`.
    FusedLasso(&'a FusedLassoLsInstance),
    /// `w − u = 0`.
    Logistic(&'a LogisticInstance),
}

/// Scaled-dual ADMM. The w-update runs `opts.inner_steps` CG iterations
/// (warm-started at the previous w) on the quadratic subproblem; for the
/// logistic loss that subproblem is the Newton model at the current w.
/// Stops when the relative primal and dual residuals are both below
/// `opts.tol`. Returns the shrunken copy `u`, which is exactly sparse.
pub fn admm_solve(problem: AdmmProblem, opts: &FirstOrderOptions) -> Result<(Vec<f64>, FirstOrderReport)> {
    if !(opts.rho_admm > 0.0) {
        return Err(Error::invalid("ADMM penalty must be positive"));
    }
    if opts.inner_steps == 0 {
        return Err(Error::invalid("ADMM needs at least one inner CG step"));
    }
    match problem {
        AdmmProblem::FusedLasso(inst) => fused_lasso(inst, opts),
        AdmmProblem::Logistic(inst) => logistic(inst, opts),
    }
}

/// Runs `steps` CG iterations on `M x = rhs` starting from `x0`.
fn cg_from(m: &dyn LinearOperator, rhs: &[f64], x0: &[f64], steps: usize) -> Vec<f64> {
    let mx = m.apply(x0);
    let r: Vec<f64> = rhs.iter().zip(&mx).map(|(a, b)| a - b).collect();
    if norm2(&r) == 0.0 {
        return x0.to_vec();
    }
    let out = pcg(m, &r, &IdentityPreconditioner(rhs.len()), 1e-14, steps);
    x0.iter().zip(&out.solution).map(|(a, b)| a + b).collect()
}

fn fused_lasso(inst: &FusedLassoLsInstance, opts: &FirstOrderOptions) -> Result<(Vec<f64>, FirstOrderReport)> {
    inst.validate()?;
    let clock = Clock::new(opts.time_budget_s);
    let mut report = FirstOrderReport::new("admm");
    let rho = opts.rho_admm;
    let (s, q) = (inst.samples() as f64, inst.voxels());
    let d = CscMatrix::from_dense(&inst.data);
    let l = inst.tv();
    let nl = l.nrows();
    let dty: Vec<f64> = d.apply_transpose(&inst.labels).iter().map(|v| v / s).collect();
    let op = SymOp {
        n: q,
        f: |v: &[f64]| {
            let mut out: Vec<f64> = d.apply_transpose(&d.apply(v)).iter().map(|x| x / s).collect();
            let ltl = l.apply_transpose(&l.apply(v));
            for ((o, vi), li) in out.iter_mut().zip(v).zip(&ltl) {
                *o += rho * (vi + li);
            }
            out
        },
    };

    let mut w = vec![0.0; q];
    let mut u = vec![0.0; q];
    let mut dd = vec![0.0; nl];
    let (mut a, mut b) = (vec![0.0; q], vec![0.0; nl]);
    for _ in 0..opts.max_iter {
        let t: Vec<f64> = dd.iter().zip(&b).map(|(x, y)| rho * (x - y)).collect();
        let mut rhs = l.apply_transpose(&t);
        for (((r, c), ui), ai) in rhs.iter_mut().zip(&dty).zip(&u).zip(&a) {
            *r += c + rho * (ui - ai);
        }
        w = cg_from(&op, &rhs, &w, opts.inner_steps);

        let lw = l.apply(&w);
        let u_new = soft_threshold(&w.iter().zip(&a).map(|(x, y)| x + y).collect::<Vec<_>>(), inst.tau1 / rho);
        let d_new = soft_threshold(&lw.iter().zip(&b).map(|(x, y)| x + y).collect::<Vec<_>>(), inst.tau2 / rho);
        let mut primal = 0.0;
        for ((ai, wi), ui) in a.iter_mut().zip(&w).zip(&u_new) {
            *ai += wi - ui;
            primal += (wi - ui) * (wi - ui);
        }
        for ((bi, li), di) in b.iter_mut().zip(&lw).zip(&d_new) {
            *bi += li - di;
            primal += (li - di) * (li - di);
        }
        let du: Vec<f64> = u_new.iter().zip(&u).map(|(x, y)| x - y).collect();
        let dd_diff: Vec<f64> = d_new.iter().zip(&dd).map(|(x, y)| x - y).collect();
        let mut dual_vec = l.apply_transpose(&dd_diff);
        for (x, y) in dual_vec.iter_mut().zip(&du) {
            *x += y;
        }
        u = u_new;
        dd = d_new;

        let scale = norm2(&w).max(1.0);
        let primal = primal.sqrt() / scale;
        let dual = rho * norm2(&dual_vec) / scale;
        report.iterations += 1;
        report.primal_feasibility.push(primal);
        report.dual_residual.push(dual);
        report.objective.push(inst.objective(&u));
        if primal <= opts.tol && dual <= opts.tol {
            report.converged = true;
            break;
        }
        if clock.expired() {
            break;
        }
    }
    report.time_s = clock.elapsed();
    Ok((u, report))
}

fn logistic(inst: &LogisticInstance, opts: &FirstOrderOptions) -> Result<(Vec<f64>, FirstOrderReport)> {
    inst.validate()?;
    let clock = Clock::new(opts.time_budget_s);
    let mut report = FirstOrderReport::new("admm");
    let rho = opts.rho_admm;
    let loss = inst.loss();
    let n = inst.features();
    let data = inst.design();

    let mut w = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut a = vec![0.0; n];
    for _ in 0..opts.max_iter {
        // Newton model of φ(w) + ρ/2‖w − u + a‖² at the current w
        let g = loss.gradient(&w);
        let curv = loss.curvature(&w);
        let op = SymOp {
            n,
            f: |v: &[f64]| {
                let mut t = data.apply(v);
                for (ti, ci) in t.iter_mut().zip(&curv) {
                    *ti *= ci;
                }
                let mut out = data.apply_transpose(&t);
                for (o, vi) in out.iter_mut().zip(v) {
                    *o += rho * vi;
                }
                out
            },
        };
        let rhs: Vec<f64> = (0..n).map(|j| -(g[j] + rho * (w[j] - u[j] + a[j]))).collect();
        let step = cg_from(&op, &rhs, &vec![0.0; n], opts.inner_steps);
        for (wi, si) in w.iter_mut().zip(&step) {
            *wi += si;
        }

        let u_new = soft_threshold(&w.iter().zip(&a).map(|(x, y)| x + y).collect::<Vec<_>>(), inst.tau / rho);
        let mut primal = 0.0;
        for ((ai, wi), ui) in a.iter_mut().zip(&w).zip(&u_new) {
            *ai += wi - ui;
            primal += (wi - ui) * (wi - ui);
        }
        let dual: f64 = u_new.iter().zip(&u).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        u = u_new;

        let scale = norm2(&w).max(1.0);
        let primal = primal.sqrt() / scale;
        let dual = rho * dual / scale;
        report.iterations += 1;
        report.primal_feasibility.push(primal);
        report.dual_residual.push(dual);
        report.objective.push(loss.value(&u) + inst.tau * norm1(&u));
        if primal <= opts.tol && dual <= opts.tol {
            report.converged = true;
            break;
        }
        if clock.expired() {
            break;
        }
    }
    report.time_s = clock.elapsed();
    Ok((u, report))
}
