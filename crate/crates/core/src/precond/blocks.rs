use super::PreconditionerInfo;
use crate::krylov::{DenseCholesky, LdlFactor, LdlMode, Preconditioner, SymbolicLdl};
use crate::linops::CscMatrix;
use crate::{Error, Result};
use std::time::Instant;

fn expanded_weights(n: usize, active: &[usize], diag: &[f64]) -> Result<Vec<f64>> {
    if active.len() != diag.len() {
        return Err(Error::dims("weights do not match the working set"));
    }
    let mut w = vec![0.0; n];
    for (k, &j) in active.iter().enumerate() {
        let d = diag[k];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::invalid(format!(
                "diagonal entry {d} at variable {j} is not positive (invalid iterate)"
            )));
        }
        w[j] = 1.0 / d;
    }
    Ok(w)
}

fn factor_spd(m: &CscMatrix, cached: Option<&SymbolicLdl>) -> Result<LdlFactor> {
    match cached {
        Some(sym) if sym.dim() == m.nrows() => sym.factor_with(m, LdlMode::Positive),
        _ => SymbolicLdl::analyze(m)?.factor_with(m, LdlMode::Positive),
    }
}

/// `P = blockdiag(M₁, M₃)` for the normal matrix `A G⁻¹ Aᵀ + δI`, with the
/// rows of A split at `split`: `M₁` (leading rows, dense Cholesky) and
/// `M₃` (trailing rows, sparse Cholesky). Dropped columns get zero weight,
/// so the sparsity of `M₃` never changes and its ordering can be reused.
pub struct FmriBlockNormal {
    split: usize,
    m1: DenseCholesky,
    m3: LdlFactor,
    info: PreconditionerInfo,
}

impl FmriBlockNormal {
    /// `g` is the diagonal of ∇²f + Ξ + ρI on the working set `active`.
    pub fn build(
        a: &CscMatrix,
        active: &[usize],
        g: &[f64],
        delta: f64,
        split: usize,
        cached: Option<&SymbolicLdl>,
    ) -> Result<Self> {
        let t0 = Instant::now();
        let m = a.nrows();
        if split > m {
            return Err(Error::invalid("block split exceeds the row count"));
        }
        if m1_too_large(split, m) {
            // still valid, just slower than the method intends
        }
        let w = expanded_weights(a.ncols(), active, g)?;
        let a1 = a.row_block(0, split);
        let a2 = a.row_block(split, m);
        let mut m1 = a1.weighted_gram(&w).to_dense();
        for i in 0..split {
            m1[(i, i)] += delta;
        }
        let m1 = DenseCholesky::factor(&m1)?;
        let m3 = a2.weighted_gram(&w).add_diagonal(&vec![delta; m - split]);
        let m3 = factor_spd(&m3, cached).map_err(|e| match e {
            Error::NotPositiveDefinite { pivot, value } => Error::NotPositiveDefinite {
                pivot: pivot + split,
                value,
            },
            other => other,
        })?;
        let info = PreconditionerInfo {
            kind: "fmri-block-normal",
            dense_factor_dim: split,
            sparse_factor_dim: m - split,
            sparse_factor_nnz: m3.symbolic().factor_nnz(),
            build_time_s: t0.elapsed().as_secs_f64(),
        };
        Ok(Self { split, m1, m3, info })
    }

    pub fn symbolic(&self) -> &SymbolicLdl {
        self.m3.symbolic()
    }

    pub fn info(&self) -> &PreconditionerInfo {
        &self.info
    }
}

fn m1_too_large(split: usize, m: usize) -> bool {
    split > m - split
}

impl Preconditioner for FmriBlockNormal {
    fn dim(&self) -> usize {
        self.split + self.m3.dim()
    }

    fn apply_inverse(&self, r: &[f64], out: &mut [f64]) {
        let (r1, r2) = r.split_at(self.split);
        let (o1, o2) = out.split_at_mut(self.split);
        o1.copy_from_slice(r1);
        self.m1.solve_in_place(o1);
        self.m3.solve_into(r2, o2);
    }
}

/// `P = blockdiag(H̃, A H̃⁻¹ Aᵀ + δI)` for the augmented matrix, where H̃
/// already contains Ξ + ρ. The Schur block is factored sparsely.
pub struct AugBlockDiagonal {
    h_tilde: Vec<f64>,
    schur: LdlFactor,
    info: PreconditionerInfo,
}

impl AugBlockDiagonal {
    pub fn build(
        a: &CscMatrix,
        active: &[usize],
        h_tilde: &[f64],
        delta: f64,
        cached: Option<&SymbolicLdl>,
    ) -> Result<Self> {
        let t0 = Instant::now();
        let w = expanded_weights(a.ncols(), active, h_tilde)?;
        let s = a.weighted_gram(&w).add_diagonal(&vec![delta; a.nrows()]);
        let schur = factor_spd(&s, cached)?;
        let info = PreconditionerInfo {
            kind: "aug-block-diagonal",
            dense_factor_dim: 0,
            sparse_factor_dim: a.nrows(),
            sparse_factor_nnz: schur.symbolic().factor_nnz(),
            build_time_s: t0.elapsed().as_secs_f64(),
        };
        Ok(Self {
            h_tilde: h_tilde.to_vec(),
            schur,
            info,
        })
    }

    pub fn symbolic(&self) -> &SymbolicLdl {
        self.schur.symbolic()
    }

    pub fn info(&self) -> &PreconditionerInfo {
        &self.info
    }

    pub fn h_tilde(&self) -> &[f64] {
        &self.h_tilde
    }
}

impl Preconditioner for AugBlockDiagonal {
    fn dim(&self) -> usize {
        self.h_tilde.len() + self.schur.dim()
    }

    fn apply_inverse(&self, r: &[f64], out: &mut [f64]) {
        let n = self.h_tilde.len();
        for k in 0..n {
            out[k] = r[k] / self.h_tilde[k];
        }
        self.schur.solve_into(&r[n..], &mut out[n..]);
    }
}
