use super::options::{LinearSolverKind, PreconditionerKind, SolverOptions};
use super::state::{IpPmmState, Residuals};
use super::{ConvexProgram, HessianStructure};
use crate::krylov::{
    minres, pcg, DiagonalPreconditioner, IdentityPreconditioner, LdlFactor, LdlMode, Preconditioner,
    SymbolicLdl,
};
use crate::linops::{CscMatrix, LinearOperator, OperatorKind, Triplets};
use crate::precond::{AugBlockDiagonal, FmriBlockNormal, HtildeChoice};
use crate::vecops::norm2;
use crate::{Error, Result};
use std::time::Instant;

enum HessianBlock {
    Explicit(CscMatrix),
    Diagonal(Vec<f64>),
    Action,
}

/// Regularized augmented matrix `[[−(∇²f + Ξ + ρI), Aᵀ], [A, δI]]` restricted
/// to the working set G. Hessians given only as actions stay implicit.
pub struct NewtonMatrix<'a> {
    program: &'a ConvexProgram,
    active: Vec<usize>,
    a: CscMatrix,
    x: Vec<f64>,
    reg: Vec<f64>,
    delta: f64,
    hessian: HessianBlock,
}

impl<'a> NewtonMatrix<'a> {
    /// With `want_explicit`, a non-diagonal Hessian is requested as a
    /// matrix (needed for factorization).
    pub fn new(state: &IpPmmState, program: &'a ConvexProgram, want_explicit: bool) -> Result<Self> {
        let active = state.active_indices();
        let a = if active.len() == program.n() {
            program.a.clone()
        } else {
            program.a.select_columns(&active)
        };
        let reg: Vec<f64> = active
            .iter()
            .map(|&j| {
                let xi = if program.nonneg[j] { state.z[j] / state.x[j] } else { 0.0 };
                xi + state.rho
            })
            .collect();
        let obj = &program.objective;
        let hessian = match obj.hessian_structure() {
            HessianStructure::Diagonal => {
                let d = obj.hessian_diagonal(&state.x);
                HessianBlock::Diagonal(active.iter().map(|&j| d[j]).collect())
            }
            HessianStructure::General if want_explicit => {
                let h = obj.hessian_matrix(&state.x).ok_or_else(|| {
                    Error::UnsupportedStructure(
                        "factorization needs an explicit Hessian; use an iterative solver".into(),
                    )
                })?;
                let h = if active.len() == program.n() {
                    h
                } else {
                    h.select_principal(&active)
                };
                HessianBlock::Explicit(h)
            }
            HessianStructure::General => HessianBlock::Action,
        };
        Ok(Self {
            program,
            active,
            a,
            x: state.x.clone(),
            reg,
            delta: state.delta,
            hessian,
        })
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// A restricted to the working columns.
    pub fn a(&self) -> &CscMatrix {
        &self.a
    }

    /// Ξ + ρ on the working set.
    pub fn regularization(&self) -> &[f64] {
        &self.reg
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn has_diagonal_hessian(&self) -> bool {
        matches!(self.hessian, HessianBlock::Diagonal(_))
    }

    /// ∇²f restricted to G applied to `v` (length |G|).
    pub fn hessian_apply(&self, v: &[f64]) -> Vec<f64> {
        match &self.hessian {
            HessianBlock::Explicit(h) => h.apply(v),
            HessianBlock::Diagonal(d) => d.iter().zip(v).map(|(a, b)| a * b).collect(),
            HessianBlock::Action => {
                let mut full = vec![0.0; self.program.n()];
                for (k, &j) in self.active.iter().enumerate() {
                    full[j] = v[k];
                }
                let hv = self.program.objective.hessian_apply(&self.x, &full);
                self.active.iter().map(|&j| hv[j]).collect()
            }
        }
    }

    /// Exact Hessian diagonal on G.
    pub fn hessian_diagonal(&self) -> Vec<f64> {
        match &self.hessian {
            HessianBlock::Diagonal(d) => d.clone(),
            HessianBlock::Explicit(h) => h.diagonal(),
            HessianBlock::Action => {
                let d = self.program.objective.hessian_diagonal(&self.x);
                self.active.iter().map(|&j| d[j]).collect()
            }
        }
    }

    /// H̃ of the chosen kind plus Ξ + ρ, on G.
    pub fn h_tilde(&self, choice: HtildeChoice) -> Vec<f64> {
        let base = match choice {
            HtildeChoice::DiagH => self.hessian_diagonal(),
            HtildeChoice::USquared => {
                let d = self.program.objective.hessian_diagonal_approx(&self.x);
                self.active.iter().map(|&j| d[j]).collect()
            }
        };
        base.iter().zip(&self.reg).map(|(h, r)| h + r).collect()
    }

    /// Explicit sparse augmented matrix (both triangles).
    pub fn to_csc(&self) -> Result<CscMatrix> {
        let (ng, m) = (self.n_active(), self.m());
        let mut t = Triplets::with_capacity(ng + m, ng + m, 2 * self.a.nnz() + 2 * ng + m);
        match &self.hessian {
            HessianBlock::Explicit(h) => t.push_block(0, 0, h, -1.0),
            HessianBlock::Diagonal(d) => {
                for (k, &v) in d.iter().enumerate() {
                    t.push(k, k, -v);
                }
            }
            HessianBlock::Action => {
                return Err(Error::UnsupportedStructure(
                    "Hessian is only available as an action".into(),
                ))
            }
        }
        for (k, &r) in self.reg.iter().enumerate() {
            t.push(k, k, -r);
        }
        t.push_block(ng, 0, &self.a, 1.0);
        t.push_block_transposed(0, ng, &self.a, 1.0);
        for i in 0..m {
            t.push(ng + i, ng + i, self.delta);
        }
        Ok(t.to_csc())
    }

    /// Normal-equations operator; requires a diagonal Hessian.
    pub fn normal_operator(&self) -> Result<NormalOperator> {
        let HessianBlock::Diagonal(d) = &self.hessian else {
            return Err(Error::UnsupportedStructure(
                "normal equations need a diagonal Hessian; use the augmented system".into(),
            ));
        };
        let g: Vec<f64> = d.iter().zip(&self.reg).map(|(h, r)| h + r).collect();
        Ok(NormalOperator {
            a: self.a.clone(),
            g_inv: g.iter().map(|v| 1.0 / v).collect(),
            g,
            delta: self.delta,
        })
    }
}

impl LinearOperator for NewtonMatrix<'_> {
    fn rows(&self) -> usize {
        self.n_active() + self.m()
    }

    fn cols(&self) -> usize {
        self.rows()
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Composite
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let ng = self.n_active();
        let (v1, v2) = v.split_at(ng);
        let hv = self.hessian_apply(v1);
        let atv = self.a.apply_transpose(v2);
        for k in 0..ng {
            out[k] = -(hv[k] + self.reg[k] * v1[k]) + atv[k];
        }
        let av = self.a.apply(v1);
        for i in 0..self.m() {
            out[ng + i] = av[i] + self.delta * v2[i];
        }
    }

    fn apply_transpose_into(&self, u: &[f64], out: &mut [f64]) {
        self.apply_into(u, out)
    }
}

/// `Δy ↦ (A G⁻¹ Aᵀ + δI) Δy` with diagonal `G = ∇²f + Ξ + ρI`.
#[derive(Debug, Clone)]
pub struct NormalOperator {
    a: CscMatrix,
    g: Vec<f64>,
    g_inv: Vec<f64>,
    delta: f64,
}

impl NormalOperator {
    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// r₂ + A G⁻¹ r₁
    pub fn rhs(&self, r1: &[f64], r2: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = r1.iter().zip(&self.g_inv).map(|(r, gi)| r * gi).collect();
        let mut out = self.a.apply(&scaled);
        for (o, r) in out.iter_mut().zip(r2) {
            *o += r;
        }
        out
    }

    /// Δx = G⁻¹ (AᵀΔy − r₁)
    pub fn recover_dx(&self, dy: &[f64], r1: &[f64]) -> Vec<f64> {
        let aty = self.a.apply_transpose(dy);
        aty.iter().zip(r1).zip(&self.g_inv).map(|((a, r), gi)| (a - r) * gi).collect()
    }

    /// Diagonal of the operator (Jacobi preconditioner).
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![self.delta; self.a.nrows()];
        for (i, j, v) in self.a.iter() {
            d[i] += v * v * self.g_inv[j];
        }
        d
    }

    pub fn to_csc(&self) -> CscMatrix {
        let m = self.a.nrows();
        self.a.weighted_gram(&self.g_inv).add_diagonal(&vec![self.delta; m])
    }
}

impl LinearOperator for NormalOperator {
    fn rows(&self) -> usize {
        self.a.nrows()
    }

    fn cols(&self) -> usize {
        self.a.nrows()
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Composite
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let mut t = self.a.apply_transpose(v);
        for (ti, gi) in t.iter_mut().zip(&self.g_inv) {
            *ti *= gi;
        }
        self.a.apply_into(&t, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o += self.delta * vi;
        }
    }

    fn apply_transpose_into(&self, u: &[f64], out: &mut [f64]) {
        self.apply_into(u, out)
    }
}

/// Right-hand side `(r₁, r₂)` of the augmented system plus the third-block
/// term `t = σμe − XZe − ΔX_aff ΔZ_aff e` used to recover Δz.
#[derive(Debug, Clone)]
pub struct NewtonRhs {
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub t: Vec<f64>,
    x: Vec<f64>,
    z: Vec<f64>,
    nonneg: Vec<bool>,
}

impl NewtonRhs {
    /// `correction` holds the affine (Δx, Δz) restricted to G.
    pub fn new(
        state: &IpPmmState,
        program: &ConvexProgram,
        active: &[usize],
        res: &Residuals,
        sigma: f64,
        correction: Option<(&[f64], &[f64])>,
    ) -> Self {
        let ng = active.len();
        let mut r1 = Vec::with_capacity(ng);
        let mut t = Vec::with_capacity(ng);
        let mut x = Vec::with_capacity(ng);
        let mut z = Vec::with_capacity(ng);
        let mut nonneg = Vec::with_capacity(ng);
        for (k, &j) in active.iter().enumerate() {
            let base = res.dual[j] + sigma * state.rho * (state.x[j] - state.zeta[j]);
            if program.nonneg[j] {
                let mut tj = sigma * state.mu - state.x[j] * state.z[j];
                if let Some((dx, dz)) = correction {
                    tj -= dx[k] * dz[k];
                }
                r1.push(base - tj / state.x[j]);
                t.push(tj);
            } else {
                r1.push(base);
                t.push(0.0);
            }
            x.push(state.x[j]);
            z.push(state.z[j]);
            nonneg.push(program.nonneg[j]);
        }
        let r2 = res
            .primal
            .iter()
            .zip(state.y.iter().zip(&state.eta))
            .map(|(p, (y, e))| p - sigma * state.delta * (y - e))
            .collect();
        Self {
            r1,
            r2,
            t,
            x,
            z,
            nonneg,
        }
    }

    /// Δz_I = X⁻¹(t − ZΔx_I), Δz_F = 0 (on G).
    pub fn recover_dz(&self, dx: &[f64]) -> Vec<f64> {
        (0..dx.len())
            .map(|k| {
                if self.nonneg[k] {
                    (self.t[k] - self.z[k] * dx[k]) / self.x[k]
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut v = self.r1.clone();
        v.extend_from_slice(&self.r2);
        v
    }
}

/// Builds the augmented matrix and right-hand side at `state` for the
/// centering parameter `sigma` (no second-order correction).
pub fn assemble_augmented_system<'a>(
    state: &IpPmmState,
    program: &'a ConvexProgram,
    sigma: f64,
) -> Result<(NewtonMatrix<'a>, NewtonRhs)> {
    let mat = NewtonMatrix::new(state, program, false)?;
    let res = state.residuals(program);
    let rhs = NewtonRhs::new(state, program, mat.active(), &res, sigma, None);
    Ok((mat, rhs))
}

/// Normal-equations operator and right-hand side `r₂ + A G⁻¹ r₁`.
pub fn assemble_normal_equations(
    state: &IpPmmState,
    program: &ConvexProgram,
    sigma: f64,
) -> Result<(NormalOperator, Vec<f64>)> {
    if program.objective.hessian_structure() != HessianStructure::Diagonal {
        return Err(Error::UnsupportedStructure(
            "normal equations need a diagonal Hessian; use the augmented system".into(),
        ));
    }
    let (mat, rhs) = assemble_augmented_system(state, program, sigma)?;
    let op = mat.normal_operator()?;
    let r = op.rhs(&rhs.r1, &rhs.r2);
    Ok((op, r))
}

/// Search direction on the full index range (zeros on dropped entries).
#[derive(Debug, Clone)]
pub struct Direction {
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub dz: Vec<f64>,
    pub sigma: f64,
    pub inner_iters: usize,
    /// An inner solve stopped before reaching its tolerance.
    pub inexact: bool,
    pub assembly_time: f64,
    pub factor_time: f64,
    pub solve_time: f64,
}

pub(crate) enum Prepared {
    Direct(LdlFactor, CscMatrix),
    Pcg(NormalOperator, Box<dyn Preconditioner>),
    Minres(Box<dyn Preconditioner>),
}

pub(crate) struct InnerSolve {
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Linear-solver state that survives across iterations (cached orderings).
pub struct LinearSolverHandle {
    kind: LinearSolverKind,
    precond: PreconditionerKind,
    inner_tol: Option<f64>,
    inner_maxit: Option<usize>,
    block_split: Option<usize>,
    kkt_symbolic: Option<(usize, SymbolicLdl)>,
    precond_symbolic: Option<SymbolicLdl>,
}

impl LinearSolverHandle {
    pub fn new(options: &SolverOptions, program: &ConvexProgram) -> Self {
        Self {
            kind: options.linear_solver,
            precond: options.preconditioner,
            inner_tol: options.inner_tol,
            inner_maxit: options.inner_maxit,
            block_split: program.block_split,
            kkt_symbolic: None,
            precond_symbolic: None,
        }
    }

    pub fn kind(&self) -> LinearSolverKind {
        self.kind
    }

    pub(crate) fn prepare(&mut self, mat: &NewtonMatrix) -> Result<Prepared> {
        match self.kind {
            LinearSolverKind::DirectAugmented => {
                let k = mat.to_csc()?;
                let key = mat.n_active();
                let stale = !matches!(&self.kkt_symbolic, Some((n, _)) if *n == key);
                if stale {
                    self.kkt_symbolic = Some((key, SymbolicLdl::analyze(&k)?));
                }
                let sym = &self.kkt_symbolic.as_ref().expect("analysed above").1;
                let f = sym.factor_with(&k, LdlMode::QuasiDefinite)?;
                Ok(Prepared::Direct(f, k))
            }
            LinearSolverKind::PcgNormal => {
                let op = mat.normal_operator()?;
                let prec: Box<dyn Preconditioner> = match self.precond {
                    PreconditionerKind::Identity => Box::new(IdentityPreconditioner(mat.m())),
                    PreconditionerKind::Jacobi => Box::new(DiagonalPreconditioner::new(&op.diagonal())?),
                    PreconditionerKind::FmriBlockNormal => {
                        let split = self.block_split.ok_or_else(|| {
                            Error::invalid("block normal preconditioner needs a program block split")
                        })?;
                        let p = FmriBlockNormal::build(
                            &mat.program.a,
                            mat.active(),
                            op.g(),
                            mat.delta(),
                            split,
                            self.precond_symbolic.as_ref(),
                        )?;
                        self.precond_symbolic = Some(p.symbolic().clone());
                        Box::new(p)
                    }
                    PreconditionerKind::AugBlockDiagonal(_) => {
                        return Err(Error::invalid(
                            "augmented block preconditioner does not apply to the normal equations",
                        ))
                    }
                };
                Ok(Prepared::Pcg(op, prec))
            }
            LinearSolverKind::MinresAugmented => {
                let prec: Box<dyn Preconditioner> = match self.precond {
                    PreconditionerKind::Identity => Box::new(IdentityPreconditioner(mat.rows())),
                    PreconditionerKind::AugBlockDiagonal(choice) => {
                        let p = AugBlockDiagonal::build(
                            &mat.program.a,
                            mat.active(),
                            &mat.h_tilde(choice),
                            mat.delta(),
                            self.precond_symbolic.as_ref(),
                        )?;
                        self.precond_symbolic = Some(p.symbolic().clone());
                        Box::new(p)
                    }
                    other => {
                        return Err(Error::invalid(format!(
                            "preconditioner {other:?} does not apply to the augmented system"
                        )))
                    }
                };
                Ok(Prepared::Minres(prec))
            }
        }
    }

    pub(crate) fn solve(&self, prepared: &Prepared, mat: &NewtonMatrix, rhs: &NewtonRhs) -> InnerSolve {
        let ng = mat.n_active();
        match prepared {
            Prepared::Direct(f, k) => {
                let b = rhs.stacked();
                let mut sol = f.solve(&b);
                // two rounds of iterative refinement against the exact matrix
                let bnorm = norm2(&b).max(f64::MIN_POSITIVE);
                for _ in 0..2 {
                    let ks = k.apply(&sol);
                    let r: Vec<f64> = b.iter().zip(&ks).map(|(bi, ki)| bi - ki).collect();
                    if norm2(&r) <= 1e-14 * bnorm {
                        break;
                    }
                    let c = f.solve(&r);
                    for (s, ci) in sol.iter_mut().zip(&c) {
                        *s += ci;
                    }
                }
                let dy = sol.split_off(ng);
                let converged = sol_is_finite(&sol) && sol_is_finite(&dy);
                InnerSolve {
                    dx: sol,
                    dy,
                    iterations: 0,
                    converged,
                }
            }
            Prepared::Pcg(op, prec) => {
                let b = op.rhs(&rhs.r1, &rhs.r2);
                let tol = self.inner_tol.unwrap_or_else(|| {
                    let nb = norm2(&b);
                    if nb < 1.0 {
                        1e-4
                    } else {
                        (1e-4 / nb).max(1e-8)
                    }
                });
                let out = pcg(op, &b, prec.as_ref(), tol, self.inner_maxit.unwrap_or(2000));
                let dx = op.recover_dx(&out.solution, &rhs.r1);
                InnerSolve {
                    dx,
                    dy: out.solution,
                    iterations: out.iterations,
                    converged: out.converged,
                }
            }
            Prepared::Minres(prec) => {
                let b = rhs.stacked();
                let out = minres(
                    mat,
                    &b,
                    prec.as_ref(),
                    self.inner_tol.unwrap_or(1e-4),
                    self.inner_maxit.unwrap_or(20),
                );
                let mut sol = out.solution;
                let dy = sol.split_off(ng);
                InnerSolve {
                    dx: sol,
                    dy,
                    iterations: out.iterations,
                    converged: out.converged,
                }
            }
        }
    }
}

fn sol_is_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub(crate) fn timed<T>(acc: &mut f64, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let out = f();
    *acc += t.elapsed().as_secs_f64();
    out
}
