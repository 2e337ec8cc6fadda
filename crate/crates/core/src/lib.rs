//! Interior point-proximal method of multipliers (IP-PMM) for sparse
//! approximation problems.
//!
//! The crate is organised bottom-up:
//!
//! - [`linops`]: explicit sparse/dense operators, finite-difference (TV)
//!   operators and FFT-applied block-circulant convolutions.
//! - [`krylov`]: sparse and dense Cholesky/LDLᵀ factorizations, PCG and MINRES.
//! - [`ippmm`]: the IP-PMM engine (Newton systems, predictor-corrector,
//!   penalty and proximal-estimate updates, termination).
//! - [`dropping`]: the variable-dropping heuristic and its post-solve audit.
//! - [`problems`]: split-variable builders for portfolio, fused-lasso least
//!   squares, Poisson-TV restoration and ℓ¹-logistic regression.
//! - [`precond`]: block-diagonal preconditioners and spectral verification.
//! - [`baselines`]: soft-thresholding, ASB-Chol, FISTA and ADMM.
//! - [`metrics`]: portfolio ratios, classification and image-quality scores.
//! - [`harness`]: synthetic generators, file formats and configuration.

pub mod baselines;
pub mod dropping;
pub mod error;
pub mod harness;
pub mod ippmm;
pub mod krylov;
pub mod linops;
pub mod metrics;
pub mod precond;
pub mod problems;
pub mod vecops;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
