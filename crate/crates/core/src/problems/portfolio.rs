use super::{merge_split, split_signed};
use crate::ippmm::{ConvexProgram, QuadraticObjective};
use crate::krylov::DenseCholesky;
use crate::linops::{make_difference_operator, CscMatrix, LinearOperator, Triplets};
use crate::vecops::norm1;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Multi-period mean-variance portfolio with ℓ¹ and fused (turnover)
/// penalties. Period `j` holds `w_j ∈ ℝˢ`; the stacked vector has length
/// `s·m`, period-major.
#[derive(Debug, Clone)]
pub struct PortfolioInstance {
    pub covariances: Vec<DMatrix<f64>>,
    pub returns: Vec<Vec<f64>>,
    pub xi_init: f64,
    pub xi_term: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl PortfolioInstance {
    pub fn new(
        covariances: Vec<DMatrix<f64>>,
        returns: Vec<Vec<f64>>,
        xi_init: f64,
        xi_term: f64,
        tau1: f64,
        tau2: f64,
    ) -> Result<Self> {
        let inst = Self {
            covariances,
            returns,
            xi_init,
            xi_term,
            tau1,
            tau2,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.covariances.len();
        if m < 2 {
            return Err(Error::invalid("a multi-period portfolio needs at least two periods"));
        }
        if self.returns.len() != m {
            return Err(Error::dims(format!("{m} covariance blocks but {} return vectors", self.returns.len())));
        }
        let s = self.covariances[0].nrows();
        for (j, c) in self.covariances.iter().enumerate() {
            if c.nrows() != s || c.ncols() != s || self.returns[j].len() != s {
                return Err(Error::dims(format!("period {j} does not have {s} assets")));
            }
            DenseCholesky::factor(c).map_err(|_| {
                Error::invalid(format!("covariance block {j} is not positive definite"))
            })?;
        }
        if self.tau1 < 0.0 || self.tau2 < 0.0 {
            return Err(Error::invalid("regularization weights must be non-negative"));
        }
        Ok(())
    }

    pub fn assets(&self) -> usize {
        self.covariances[0].nrows()
    }

    pub fn periods(&self) -> usize {
        self.covariances.len()
    }

    /// Length of the stacked holdings vector, `s·m`.
    pub fn n(&self) -> usize {
        self.assets() * self.periods()
    }

    /// Block-diagonal covariance `C = diag(C₁, …, C_m)`.
    pub fn covariance(&self) -> CscMatrix {
        let s = self.assets();
        let mut t = Triplets::new(self.n(), self.n());
        for (j, c) in self.covariances.iter().enumerate() {
            for a in 0..s {
                for b in 0..s {
                    if c[(a, b)] != 0.0 {
                        t.push(j * s + a, j * s + b, c[(a, b)]);
                    }
                }
            }
        }
        t.to_csc()
    }

    /// Budget constraints `Āw = b̄`: initial wealth, self-financing between
    /// consecutive periods, and the expected terminal wealth.
    pub fn budget_matrix(&self) -> CscMatrix {
        let (s, m) = (self.assets(), self.periods());
        let mut t = Triplets::new(m + 1, s * m);
        for i in 0..s {
            t.push(0, i, 1.0);
        }
        for j in 1..m {
            for i in 0..s {
                t.push(j, j * s + i, 1.0);
                t.push(j, (j - 1) * s + i, -(1.0 + self.returns[j - 1][i]));
            }
        }
        for i in 0..s {
            t.push(m, (m - 1) * s + i, 1.0 + self.returns[m - 1][i]);
        }
        t.to_csc()
    }

    pub fn budget_rhs(&self) -> Vec<f64> {
        let m = self.periods();
        let mut b = vec![0.0; m + 1];
        b[0] = self.xi_init;
        b[m] = self.xi_term;
        b
    }

    /// Turnover differences `w_{j+1} − w_j`.
    pub fn difference(&self) -> CscMatrix {
        make_difference_operator(self.periods(), self.assets())
            .expect("validated dimensions")
            .into_matrix()
    }

    /// `½wᵀCw + τ₁‖w‖₁ + τ₂‖Lw‖₁`.
    pub fn objective(&self, w: &[f64]) -> f64 {
        let cw = self.covariance().apply(w);
        let quad: f64 = 0.5 * w.iter().zip(&cw).map(|(a, b)| a * b).sum::<f64>();
        quad + self.tau1 * norm1(w) + self.tau2 * norm1(&self.difference().apply(w))
    }

    /// Equal-weight benchmark: wealth is spread uniformly over the assets
    /// each period and compounds with the realised returns.
    pub fn naive_portfolio(&self) -> Vec<f64> {
        let (s, m) = (self.assets(), self.periods());
        let mut w = vec![0.0; s * m];
        let mut wealth = self.xi_init;
        for j in 0..m {
            for i in 0..s {
                w[j * s + i] = wealth / s as f64;
            }
            wealth = (0..s).map(|i| (1.0 + self.returns[j][i]) * w[j * s + i]).sum();
        }
        w
    }

    /// Terminal wealth of [`naive_portfolio`](Self::naive_portfolio).
    pub fn naive_terminal_wealth(&self) -> f64 {
        let (s, m) = (self.assets(), self.periods());
        let w = self.naive_portfolio();
        (0..s).map(|i| (1.0 + self.returns[m - 1][i]) * w[(m - 1) * s + i]).sum()
    }

    /// Program vector for given holdings (split-consistent).
    pub fn lift(&self, w: &[f64]) -> Vec<f64> {
        let (wp, wm) = split_signed(w);
        let (dp, dm) = split_signed(&self.difference().apply(w));
        [wp, wm, dp, dm].concat()
    }

    /// Holdings `w = w⁺ − w⁻` from a program vector.
    pub fn holdings(&self, x: &[f64]) -> Vec<f64> {
        merge_split(x, 0, self.n())
    }

    /// Dense `C` (for oracles and baselines).
    pub fn covariance_dense(&self) -> DMatrix<f64> {
        self.covariance().to_dense()
    }

    /// Expected wealth trajectory `ξ_j = e ᵀ w_j` for diagnostics.
    pub fn wealth(&self, w: &[f64]) -> Vec<f64> {
        let s = self.assets();
        w.chunks(s).map(|c| c.iter().sum()).collect()
    }
}

/// `x = [w⁺; w⁻; d⁺; d⁻] ≥ 0`, `Q = [[C, −C], [−C, C]] ⊕ 0`,
/// `c = [τ₁e; τ₁e; τ₂e; τ₂e]`, `A = [[Ā, −Ā, 0, 0], [L, −L, −I, I]]`.
pub fn build_portfolio_qp(inst: &PortfolioInstance) -> Result<ConvexProgram> {
    inst.validate()?;
    let (s, m) = (inst.assets(), inst.periods());
    let n = s * m;
    let l = n - s;
    let nbar = 2 * (n + l);
    let mbar = m + 1 + l;

    let c = inst.covariance();
    let mut q = Triplets::with_capacity(nbar, nbar, 4 * c.nnz());
    q.push_block(0, 0, &c, 1.0);
    q.push_block(0, n, &c, -1.0);
    q.push_block(n, 0, &c, -1.0);
    q.push_block(n, n, &c, 1.0);

    let abar = inst.budget_matrix();
    let diff = inst.difference();
    let mut a = Triplets::with_capacity(mbar, nbar, 2 * abar.nnz() + 2 * diff.nnz() + 2 * l);
    a.push_block(0, 0, &abar, 1.0);
    a.push_block(0, n, &abar, -1.0);
    a.push_block(m + 1, 0, &diff, 1.0);
    a.push_block(m + 1, n, &diff, -1.0);
    for k in 0..l {
        a.push(m + 1 + k, 2 * n + k, -1.0);
        a.push(m + 1 + k, 2 * n + l + k, 1.0);
    }

    let mut cost = vec![inst.tau1; 2 * n];
    cost.extend(std::iter::repeat_n(inst.tau2, 2 * l));
    let mut b = inst.budget_rhs();
    b.extend(std::iter::repeat_n(0.0, l));
    let obj = QuadraticObjective::new(q.to_csc(), cost)?;
    ConvexProgram::new(a.to_csc(), b, vec![true; nbar], Box::new(obj))
}

/// Dense KKT solution of `min ½wᵀCw s.t. Āw = b̄` (no penalties).
pub fn equality_qp_oracle(inst: &PortfolioInstance) -> Result<Vec<f64>> {
    let c = inst.covariance_dense();
    let a = inst.budget_matrix().to_dense();
    let (n, m) = (c.nrows(), a.nrows());
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(&c);
    k.view_mut((n, 0), (m, n)).copy_from(&a);
    k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    let mut rhs = DVector::zeros(n + m);
    for (i, v) in inst.budget_rhs().into_iter().enumerate() {
        rhs[n + i] = v;
    }
    // the budget rows may be redundant (s = 1), so solve in the least-squares sense
    let sol = k.svd(true, true).solve(&rhs, 1e-12).map_err(Error::invalid)?;
    let res = (&a * sol.rows(0, n) - rhs.rows(n, m)).norm();
    if res > 1e-9 * (1.0 + rhs.norm()) {
        return Err(Error::invalid("budget constraints are inconsistent"));
    }
    Ok(sol.rows(0, n).iter().copied().collect())
}
