//! Split-variable builders: each application is rewritten as
//! `min f(x) s.t. Ax = b, x_I >= 0` by writing every ℓ¹-penalized vector as
//! the difference of two non-negative parts.

mod fused_lasso;
mod logistic;
mod poisson;
mod portfolio;

pub use fused_lasso::{build_fused_lasso_ls, FusedLassoLsInstance};
pub use logistic::{build_logistic_l1, LogisticInstance, LogisticObjective, LogisticLoss};
pub use poisson::{build_poisson_tv, kl_oracle, KlDivergence, PoissonObjective, PoissonTvInstance};
pub use portfolio::{build_portfolio_qp, equality_qp_oracle, PortfolioInstance};

/// `(max(v, 0), max(−v, 0))`.
pub fn split_signed(v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        v.iter().map(|&x| x.max(0.0)).collect(),
        v.iter().map(|&x| (-x).max(0.0)).collect(),
    )
}

/// `x[offset..offset+len] − x[offset+len..offset+2len]`.
pub fn merge_split(x: &[f64], offset: usize, len: usize) -> Vec<f64> {
    (0..len).map(|i| x[offset + i] - x[offset + len + i]).collect()
}

/// Largest `min(x⁺ᵢ, x⁻ᵢ)` over a split pair block.
pub fn split_overlap(x: &[f64], offset: usize, len: usize) -> f64 {
    (0..len).fold(0.0f64, |m, i| m.max(x[offset + i].min(x[offset + len + i])))
}

#[cfg(test)]
pub(crate) mod fd {
    //! Central finite-difference checks shared by the oracle tests.

    /// Relative error between the gradient and central differences with step
    /// `1e-6·(1 + ‖w‖)`.
    pub fn gradient_error(f: impl Fn(&[f64]) -> f64, grad: &[f64], w: &[f64]) -> f64 {
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1e-6 * (1.0 + norm);
        let mut fd = vec![0.0; w.len()];
        let mut p = w.to_vec();
        for j in 0..w.len() {
            p[j] = w[j] + h;
            let fp = f(&p);
            p[j] = w[j] - h;
            let fm = f(&p);
            p[j] = w[j];
            fd[j] = (fp - fm) / (2.0 * h);
        }
        let diff: f64 = fd.iter().zip(grad).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let scale: f64 = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        diff / scale.max(1e-12)
    }
}
