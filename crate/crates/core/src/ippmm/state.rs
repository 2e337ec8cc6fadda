use super::ConvexProgram;
use crate::linops::LinearOperator;
use crate::vecops::{dot, norm2};

/// Full IP-PMM iterate. Vectors have the original lengths; dropped
/// entries of `x` and `z` are held at zero.
#[derive(Debug, Clone)]
pub struct IpPmmState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub zeta: Vec<f64>,
    pub eta: Vec<f64>,
    pub mu: f64,
    pub rho: f64,
    pub delta: f64,
    pub k: usize,
    /// Dropped variables with the iteration at which they were dropped.
    pub dropped: Vec<(usize, usize)>,
    pub(crate) is_dropped: Vec<bool>,
    /// Residual norms recorded at the last (ζ, η) update.
    pub(crate) estimate_primal: f64,
    pub(crate) estimate_dual: f64,
}

/// Unscaled residual vectors at an iterate.
#[derive(Debug, Clone)]
pub struct Residuals {
    pub grad: Vec<f64>,
    /// b − Ax
    pub primal: Vec<f64>,
    /// ∇f − Aᵀy − z, zeroed on dropped indices
    pub dual: Vec<f64>,
    pub primal_norm: f64,
    pub dual_norm: f64,
    pub b_norm: f64,
    pub grad_norm: f64,
}

impl Residuals {
    pub fn primal_scaled(&self) -> f64 {
        self.primal_norm / (1.0 + self.b_norm)
    }

    pub fn dual_scaled(&self) -> f64 {
        self.dual_norm / (1.0 + self.grad_norm)
    }
}

impl IpPmmState {
    /// Default start (x_I = e, x_F = 0, z_I = e, y = 0) unless the program
    /// supplies one; ρ₀ = δ₀ = min(1, μ₀) clipped to the floors.
    pub fn initial(program: &ConvexProgram, rho_floor: f64, delta_floor: f64) -> Self {
        let (n, m) = (program.n(), program.m());
        let (x, y, z) = match &program.start {
            Some(s) => {
                let z = (0..n).map(|j| if program.nonneg[j] { s.z[j] } else { 0.0 }).collect();
                (s.x.clone(), s.y.clone(), z)
            }
            None => {
                let e: Vec<f64> = program.nonneg.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect();
                (e.clone(), vec![0.0; m], e)
            }
        };
        let mut st = Self {
            zeta: x.clone(),
            eta: y.clone(),
            x,
            y,
            z,
            mu: 0.0,
            rho: 0.0,
            delta: 0.0,
            k: 0,
            dropped: Vec::new(),
            is_dropped: vec![false; n],
            estimate_primal: f64::INFINITY,
            estimate_dual: f64::INFINITY,
        };
        st.mu = st.complementarity(program);
        let start_pen = st.mu.min(1.0);
        st.rho = start_pen.max(rho_floor);
        st.delta = start_pen.max(delta_floor);
        let r = st.residuals(program);
        st.estimate_primal = r.primal_norm;
        st.estimate_dual = r.dual_norm;
        st
    }

    /// Arbitrary iterate with ζ = x, η = y (test and analysis use).
    pub fn from_parts(
        program: &ConvexProgram,
        x: Vec<f64>,
        y: Vec<f64>,
        mut z: Vec<f64>,
        rho: f64,
        delta: f64,
    ) -> crate::Result<Self> {
        let (n, m) = (program.n(), program.m());
        if x.len() != n || z.len() != n || y.len() != m {
            return Err(crate::Error::dims("iterate does not match the program"));
        }
        if (0..n).any(|j| program.nonneg[j] && !(x[j] > 0.0 && z[j] > 0.0)) {
            return Err(crate::Error::invalid("x and z must be positive on non-negative variables"));
        }
        for j in 0..n {
            if !program.nonneg[j] {
                z[j] = 0.0;
            }
        }
        let mut st = Self {
            zeta: x.clone(),
            eta: y.clone(),
            x,
            y,
            z,
            mu: 0.0,
            rho,
            delta,
            k: 0,
            dropped: Vec::new(),
            is_dropped: vec![false; n],
            estimate_primal: f64::INFINITY,
            estimate_dual: f64::INFINITY,
        };
        st.mu = st.complementarity(program);
        Ok(st)
    }

    pub fn is_dropped(&self, j: usize) -> bool {
        self.is_dropped[j]
    }

    /// Working set G = F ∪ (I \ V), increasing.
    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.x.len()).filter(|&j| !self.is_dropped[j]).collect()
    }

    pub fn active_nonneg_count(&self, program: &ConvexProgram) -> usize {
        (0..self.x.len())
            .filter(|&j| program.nonneg[j] && !self.is_dropped[j])
            .count()
    }

    /// x_Iᵀ z_I / |I \ V| (zero when no non-negative variable remains).
    pub fn complementarity(&self, program: &ConvexProgram) -> f64 {
        let count = self.active_nonneg_count(program);
        if count == 0 {
            return 0.0;
        }
        let s: f64 = (0..self.x.len())
            .filter(|&j| program.nonneg[j] && !self.is_dropped[j])
            .map(|j| self.x[j] * self.z[j])
            .sum();
        s / count as f64
    }

    pub(crate) fn mark_dropped(&mut self, j: usize) {
        if !self.is_dropped[j] {
            self.is_dropped[j] = true;
            self.dropped.push((j, self.k));
            self.x[j] = 0.0;
            self.z[j] = 0.0;
        }
    }

    pub fn residuals(&self, program: &ConvexProgram) -> Residuals {
        let grad = program.objective.gradient(&self.x);
        let ax = program.a.apply(&self.x);
        let primal: Vec<f64> = program.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let aty = program.a.apply_transpose(&self.y);
        let dual: Vec<f64> = (0..self.x.len())
            .map(|j| {
                if self.is_dropped[j] {
                    0.0
                } else {
                    grad[j] - aty[j] - self.z[j]
                }
            })
            .collect();
        Residuals {
            primal_norm: norm2(&primal),
            dual_norm: norm2(&dual),
            b_norm: norm2(&program.b),
            grad_norm: dot(&grad, &grad).sqrt(),
            grad,
            primal,
            dual,
        }
    }
}
