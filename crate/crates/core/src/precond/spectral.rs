use super::{AugBlockDiagonal, FmriBlockNormal, HtildeChoice};
use crate::ippmm::{ConvexProgram, IpPmmState, NewtonMatrix};
use crate::krylov::Preconditioner;
use crate::linops::{to_dense, CscMatrix, LinearOperator};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

/// Largest total dimension accepted by [`spectral_check`].
pub const SPECTRAL_DIM_LIMIT: usize = 2000;

/// Distance from 1 below which an eigenvalue counts as a unit eigenvalue.
pub const UNIT_TOL: f64 = 1e-8;

/// Dense spectrum of `P⁻¹M` plus the scalar bounds used to bracket it.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub dim: usize,
    /// Sorted ascending.
    pub eigenvalues: Vec<f64>,
    pub unit_count: usize,
    pub chi: Option<f64>,
    pub alpha_h: Option<f64>,
    pub beta_h: Option<f64>,
    pub kappa_h: Option<f64>,
    /// Every eigenvalue in `(χ − tol, 2 + tol)`.
    pub normal_bounds_hold: Option<bool>,
    /// Every eigenvalue in `[−β_H − 1, −α_H] ∪ [1/(1 + β_H), 1]` up to tol.
    pub augmented_bounds_hold: Option<bool>,
}

impl SpectralReport {
    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }

    /// Records χ and checks the normal-equations interval with `tol`.
    pub fn with_chi(mut self, chi: f64, tol: f64) -> Self {
        self.chi = Some(chi);
        self.normal_bounds_hold = Some(
            self.eigenvalues
                .iter()
                .all(|&l| l > chi - tol && l < 2.0 + tol),
        );
        self
    }

    /// Records (α_H, β_H) and checks the augmented-system intervals.
    pub fn with_h_extremes(mut self, alpha: f64, beta: f64, tol: f64) -> Self {
        self.alpha_h = Some(alpha);
        self.beta_h = Some(beta);
        self.kappa_h = Some(beta / alpha);
        let (neg, pos) = augmented_intervals(alpha, beta);
        self.augmented_bounds_hold = Some(self.eigenvalues.iter().all(|&l| {
            (l >= neg.0 - tol && l <= neg.1 + tol) || (l >= pos.0 - tol && l <= pos.1 + tol)
        }));
        self
    }
}

/// Eigenvalues of `P⁻¹M` for symmetric `M` and SPD `P`, computed as the
/// spectrum of `CᵀMC` with `P⁻¹ = CCᵀ`.
pub fn spectral_check(m: &dyn LinearOperator, p: &dyn Preconditioner) -> Result<SpectralReport> {
    let n = m.rows();
    if m.cols() != n || p.dim() != n {
        return Err(Error::dims(format!(
            "operator is {}x{}, preconditioner has dimension {}",
            m.rows(),
            m.cols(),
            p.dim()
        )));
    }
    if n > SPECTRAL_DIM_LIMIT {
        return Err(Error::Refused(format!(
            "dense spectral check limited to dimension {SPECTRAL_DIM_LIMIT}, got {n}"
        )));
    }
    let md = to_dense(m);
    let mut pinv = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        p.apply_inverse(&e, &mut col);
        pinv.set_column(j, &DVector::from_column_slice(&col));
        e[j] = 0.0;
    }
    let pinv = (&pinv + pinv.transpose()) * 0.5;
    let c = pinv
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite { pivot: 0, value: f64::NAN })?
        .l();
    let md = (&md + md.transpose()) * 0.5;
    let s = c.transpose() * md * &c;
    let mut eig: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    let unit_count = eig.iter().filter(|l| (*l - 1.0).abs() <= UNIT_TOL).count();
    Ok(SpectralReport {
        dim: n,
        eigenvalues: eig,
        unit_count,
        chi: None,
        alpha_h: None,
        beta_h: None,
        kappa_h: None,
        normal_bounds_hold: None,
        augmented_bounds_hold: None,
    })
}

/// χ = δρ / (σ²_max(A) + ρδ), the lower spectral bound for the
/// block-diagonal normal-equations preconditioner.
pub fn normal_chi(a: &CscMatrix, rho: f64, delta: f64) -> f64 {
    let smax = a
        .to_dense()
        .singular_values()
        .iter()
        .fold(0.0f64, |m, &s| m.max(s));
    delta * rho / (smax * smax + rho * delta)
}

/// (α_H, β_H): extremal eigenvalues of `H̃^{-1/2} H H̃^{-1/2}`.
pub fn hhat_extremes(h: &DMatrix<f64>, h_tilde: &[f64]) -> Result<(f64, f64)> {
    let n = h.nrows();
    if h.ncols() != n || h_tilde.len() != n {
        return Err(Error::dims("H and its diagonal approximation differ in size"));
    }
    if h_tilde.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::invalid("diagonal approximation must be positive"));
    }
    let s: Vec<f64> = h_tilde.iter().map(|d| 1.0 / d.sqrt()).collect();
    let hh = DMatrix::from_fn(n, n, |i, j| 0.5 * (h[(i, j)] + h[(j, i)]) * s[i] * s[j]);
    let eig = SymmetricEigen::new(hh).eigenvalues;
    Ok((eig.min(), eig.max()))
}

/// `([−β − 1, −α], [1/(1 + β), 1])`.
pub fn augmented_intervals(alpha: f64, beta: f64) -> ((f64, f64), (f64, f64)) {
    ((-beta - 1.0, -alpha), (1.0 / (1.0 + beta), 1.0))
}

/// Tolerance on the normal-equations interval endpoints.
pub const NORMAL_BOUND_TOL: f64 = 1e-10;

/// Tolerance on the augmented-system interval endpoints.
pub const AUGMENTED_BOUND_TOL: f64 = 1e-8;

/// Spectrum of the block-diagonal preconditioned normal matrix at `state`.
/// Needs a diagonal Hessian and `program.block_split`.
pub fn normal_spectrum(program: &ConvexProgram, state: &IpPmmState) -> Result<SpectralReport> {
    let split = program
        .block_split
        .ok_or_else(|| Error::invalid("program has no dense/sparse row split"))?;
    let mat = NewtonMatrix::new(state, program, false)?;
    let op = mat.normal_operator()?;
    let pre = FmriBlockNormal::build(&program.a, mat.active(), op.g(), state.delta, split, None)?;
    let chi = normal_chi(mat.a(), state.rho, state.delta);
    Ok(spectral_check(&op, &pre)?.with_chi(chi, NORMAL_BOUND_TOL))
}

/// Spectrum of the augmented Newton matrix preconditioned by
/// `blockdiag(H̃, A H̃⁻¹ Aᵀ + δI)` at `state`, with the measured (α_H, β_H).
pub fn augmented_spectrum(program: &ConvexProgram, state: &IpPmmState, choice: HtildeChoice) -> Result<SpectralReport> {
    let mat = NewtonMatrix::new(state, program, false)?;
    let ng = mat.n_active();
    if ng + mat.m() > SPECTRAL_DIM_LIMIT {
        return Err(Error::Refused(format!(
            "dense spectral check limited to dimension {SPECTRAL_DIM_LIMIT}, got {}",
            ng + mat.m()
        )));
    }
    let dense = to_dense(&mat);
    let h = -dense.view((0, 0), (ng, ng)).into_owned();
    let h_tilde = mat.h_tilde(choice);
    let pre = AugBlockDiagonal::build(&program.a, mat.active(), &h_tilde, state.delta, None)?;
    let (alpha, beta) = hhat_extremes(&h, &h_tilde)?;
    Ok(spectral_check(&dense, &pre)?.with_h_extremes(alpha, beta, AUGMENTED_BOUND_TOL))
}
