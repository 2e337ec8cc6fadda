use super::{soft_threshold, Clock, FirstOrderOptions, FirstOrderReport};
use crate::krylov::{LdlMode, SymbolicLdl};
use crate::linops::{CscMatrix, LinearOperator};
use crate::problems::PortfolioInstance;
use crate::vecops::norm2;
use crate::{Error, Result};
use serde::Serialize;

/// Penalty weights of the split Bregman subproblem matrix
/// `H = C + λ₁ĀᵀĀ + λ₂LᵀL + λ₃I`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AsbLambdas {
    pub budget: f64,
    pub turnover: f64,
    pub holdings: f64,
}

impl Default for AsbLambdas {
    fn default() -> Self {
        Self {
            budget: 1.0,
            turnover: 1.0,
            holdings: 1.0,
        }
    }
}

/// Alternating Split Bregman for the multi-period portfolio problem
/// `min ½wᵀCw + τ₁‖u‖₁ + τ₂‖d‖₁ s.t. Āw = b̄, u = w, d = Lw`.
///
/// `H` is factorized once; each iteration is one solve with it, two
/// shrinkages and the Bregman updates. Stops when the relative primal
/// feasibility `‖(Āw − b̄, w − u, Lw − d)‖ / max(1, ‖b̄‖)` reaches `opts.tol`.
pub fn asb_chol_solve(
    inst: &PortfolioInstance,
    lambdas: AsbLambdas,
    opts: &FirstOrderOptions,
) -> Result<(Vec<f64>, FirstOrderReport)> {
    let AsbLambdas {
        budget: l1,
        turnover: l2,
        holdings: l3,
    } = lambdas;
    if !(l1 > 0.0 && l2 > 0.0 && l3 > 0.0) {
        return Err(Error::invalid("ASB penalty weights must be positive"));
    }
    inst.validate()?;
    let clock = Clock::new(opts.time_budget_s);
    let mut report = FirstOrderReport::new("asb-chol");

    let c = inst.covariance();
    let abar = inst.budget_matrix();
    let l = inst.difference();
    let b = inst.budget_rhs();
    let n = inst.n();
    let h = assemble_h(&c, &abar, &l, l1, l2, l3);
    let factor = SymbolicLdl::analyze(&h)?
        .factor_with(&h, LdlMode::Positive)
        .map_err(|e| Error::invalid(format!("ASB matrix H is not positive definite: {e}")))?;
    report.factorizations += 1;

    let scale = norm2(&b).max(1.0);
    let mut w = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut d = vec![0.0; l.nrows()];
    let (mut bu, mut bd, mut be) = (vec![0.0; n], vec![0.0; l.nrows()], vec![0.0; b.len()]);
    for _ in 0..opts.max_iter {
        // rhs = λ₁Āᵀ(b − e) + λ₂Lᵀ(d − b_d) + λ₃(u − b_u)
        let t1: Vec<f64> = b.iter().zip(&be).map(|(bi, ei)| l1 * (bi - ei)).collect();
        let t2: Vec<f64> = d.iter().zip(&bd).map(|(di, bi)| l2 * (di - bi)).collect();
        let mut rhs = abar.apply_transpose(&t1);
        for (r, v) in rhs.iter_mut().zip(l.apply_transpose(&t2)) {
            *r += v;
        }
        for ((r, ui), bi) in rhs.iter_mut().zip(&u).zip(&bu) {
            *r += l3 * (ui - bi);
        }
        w = factor.solve(&rhs);

        let lw = l.apply(&w);
        let wb: Vec<f64> = w.iter().zip(&bu).map(|(a, b)| a + b).collect();
        u = soft_threshold(&wb, inst.tau1 / l3);
        let lb: Vec<f64> = lw.iter().zip(&bd).map(|(a, b)| a + b).collect();
        d = soft_threshold(&lb, inst.tau2 / l2);

        let aw = abar.apply(&w);
        let mut feas = 0.0;
        for ((e, a), bi) in be.iter_mut().zip(&aw).zip(&b) {
            *e += a - bi;
            feas += (a - bi) * (a - bi);
        }
        for ((bi, wi), ui) in bu.iter_mut().zip(&w).zip(&u) {
            *bi += wi - ui;
            feas += (wi - ui) * (wi - ui);
        }
        for ((bi, li), di) in bd.iter_mut().zip(&lw).zip(&d) {
            *bi += li - di;
            feas += (li - di) * (li - di);
        }
        let feas = feas.sqrt() / scale;
        report.iterations += 1;
        report.primal_feasibility.push(feas);
        report.objective.push(inst.objective(&w));
        if feas <= opts.tol {
            report.converged = true;
            break;
        }
        if clock.expired() {
            break;
        }
    }
    report.time_s = clock.elapsed();
    Ok((w, report))
}

fn assemble_h(c: &CscMatrix, abar: &CscMatrix, l: &CscMatrix, l1: f64, l2: f64, l3: f64) -> CscMatrix {
    let n = c.nrows();
    let ata = abar.transpose().weighted_gram(&vec![l1; abar.nrows()]);
    let ltl = l.transpose().weighted_gram(&vec![l2; l.nrows()]);
    let mut t = crate::linops::Triplets::with_capacity(n, n, c.nnz() + ata.nnz() + ltl.nnz() + n);
    t.push_block(0, 0, c, 1.0);
    t.push_block(0, 0, &ata, 1.0);
    t.push_block(0, 0, &ltl, 1.0);
    for i in 0..n {
        t.push(i, i, l3);
    }
    t.to_csc()
}
