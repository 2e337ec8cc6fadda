//! Block-diagonal preconditioners for the IP-PMM Newton systems and a
//! dense spectral verification harness.

mod blocks;
mod spectral;

pub use blocks::{AugBlockDiagonal, FmriBlockNormal};
pub use spectral::{
    augmented_intervals, augmented_spectrum, hhat_extremes, normal_chi, normal_spectrum, spectral_check, SpectralReport,
    AUGMENTED_BOUND_TOL, NORMAL_BOUND_TOL, SPECTRAL_DIM_LIMIT, UNIT_TOL,
};

use serde::Serialize;

/// Diagonal Hessian surrogate inside the augmented preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HtildeChoice {
    /// The objective's cheap surrogate (for KL: U(w)² = g / (Dw + a)²).
    USquared,
    /// The exact Hessian diagonal.
    DiagH,
}

/// Kind tag and build metadata shared by the preconditioners.
#[derive(Debug, Clone, Serialize)]
pub struct PreconditionerInfo {
    pub kind: &'static str,
    pub dense_factor_dim: usize,
    pub sparse_factor_dim: usize,
    pub sparse_factor_nnz: usize,
    pub build_time_s: f64,
}
