use super::split_signed;
use crate::ippmm::{ConvexProgram, HessianStructure, Objective};
use crate::linops::{CscMatrix, LinearOperator, Triplets};
use crate::vecops::norm1;
use crate::{Error, Result};

/// `log(1 + e^{−t})` without overflow.
fn log1p_exp_neg(t: f64) -> f64 {
    (-t).max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `1 / (1 + e^{t})` without overflow.
fn sigmoid_neg(t: f64) -> f64 {
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

/// Average logistic loss `φ(w) = (1/n) Σ log(1 + exp(−gᵢ wᵀdᵢ))`.
#[derive(Debug, Clone)]
pub struct LogisticLoss {
    data: CscMatrix,
    labels: Vec<f64>,
}

impl LogisticLoss {
    pub fn new(data: CscMatrix, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != data.nrows() {
            return Err(Error::dims(format!("{} labels for {} samples", labels.len(), data.nrows())));
        }
        if labels.iter().any(|&g| g != 1.0 && g != -1.0) {
            return Err(Error::invalid("labels must be ±1"));
        }
        Ok(Self { data, labels })
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn samples(&self) -> usize {
        self.data.nrows()
    }

    /// Margins `gᵢ wᵀdᵢ`.
    pub fn margins(&self, w: &[f64]) -> Vec<f64> {
        let mut t = self.data.apply(w);
        for (ti, g) in t.iter_mut().zip(&self.labels) {
            *ti *= g;
        }
        t
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        self.margins(w).iter().map(|&t| log1p_exp_neg(t)).sum::<f64>() / self.samples() as f64
    }

    /// `−(1/n) Σ gᵢ pᵢ dᵢ` with `pᵢ = 1/(1 + exp(gᵢ wᵀdᵢ))`.
    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let n = self.samples() as f64;
        let r: Vec<f64> = self
            .margins(w)
            .iter()
            .zip(&self.labels)
            .map(|(&t, g)| -g * sigmoid_neg(t) / n)
            .collect();
        self.data.apply_transpose(&r)
    }

    /// `pᵢ(1 − pᵢ)/n`.
    pub fn curvature(&self, w: &[f64]) -> Vec<f64> {
        let n = self.samples() as f64;
        self.margins(w)
            .iter()
            .map(|&t| {
                let p = sigmoid_neg(t);
                p * (1.0 - p) / n
            })
            .collect()
    }

    pub fn hessian_apply(&self, w: &[f64], v: &[f64]) -> Vec<f64> {
        let s = self.curvature(w);
        let mut t = self.data.apply(v);
        for (ti, si) in t.iter_mut().zip(&s) {
            *ti *= si;
        }
        self.data.apply_transpose(&t)
    }

    pub fn hessian_diagonal(&self, w: &[f64]) -> Vec<f64> {
        let s = self.curvature(w);
        (0..self.dim())
            .map(|j| {
                let (rows, vals) = self.data.column(j);
                rows.iter().zip(vals).map(|(&i, v)| s[i] * v * v).sum()
            })
            .collect()
    }

    /// `DᵀSD/n` as a sparse matrix.
    pub fn hessian_matrix(&self, w: &[f64]) -> CscMatrix {
        self.data.transpose().weighted_gram(&self.curvature(w))
    }
}

/// `min φ(w) + τ‖w‖₁`. With `bias`, a column of ones is appended to the data.
#[derive(Debug, Clone)]
pub struct LogisticInstance {
    pub data: CscMatrix,
    pub labels: Vec<f64>,
    pub tau: f64,
    pub bias: bool,
}

impl LogisticInstance {
    pub fn new(data: CscMatrix, labels: Vec<f64>, tau: f64, bias: bool) -> Result<Self> {
        let inst = Self {
            data,
            labels,
            tau,
            bias,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau must be positive"));
        }
        LogisticLoss::new(self.data.clone(), self.labels.clone()).map(|_| ())
    }

    /// Data matrix used by the model, including the bias column.
    pub fn design(&self) -> CscMatrix {
        if !self.bias {
            return self.data.clone();
        }
        let (n, s) = (self.data.nrows(), self.data.ncols());
        let mut t = Triplets::with_capacity(n, s + 1, self.data.nnz() + n);
        t.push_block(0, 0, &self.data, 1.0);
        for i in 0..n {
            t.push(i, s, 1.0);
        }
        t.to_csc()
    }

    pub fn loss(&self) -> LogisticLoss {
        LogisticLoss::new(self.design(), self.labels.clone()).expect("validated instance")
    }

    /// Number of model weights `s`.
    pub fn features(&self) -> usize {
        self.data.ncols() + usize::from(self.bias)
    }

    pub fn objective(&self, w: &[f64]) -> f64 {
        self.loss().value(w) + self.tau * norm1(w)
    }

    /// `x = [w; w⁺; w⁻]`.
    pub fn lift(&self, w: &[f64]) -> Vec<f64> {
        let (p, m) = split_signed(w);
        [w.to_vec(), p, m].concat()
    }

    pub fn weights(&self, x: &[f64]) -> Vec<f64> {
        x[..self.features()].to_vec()
    }

    /// Predicted labels `sign(wᵀdᵢ)`, with ties counted as `+1`.
    pub fn predict(&self, w: &[f64], data: &CscMatrix) -> Vec<f64> {
        let design = if self.bias {
            LogisticInstance {
                data: data.clone(),
                labels: vec![1.0; data.nrows()],
                tau: self.tau,
                bias: true,
            }
            .design()
        } else {
            data.clone()
        };
        design.apply(w).iter().map(|&t| if t >= 0.0 { 1.0 } else { -1.0 }).collect()
    }
}

/// Split objective `φ(w) + τ eᵀ(d⁺ + d⁻)` on `x = [w; d⁺; d⁻]`.
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    loss: LogisticLoss,
    tau: f64,
}

impl LogisticObjective {
    pub fn loss(&self) -> &LogisticLoss {
        &self.loss
    }

    fn s(&self) -> usize {
        self.loss.dim()
    }

    fn pad(&self, mut v: Vec<f64>, tail: f64) -> Vec<f64> {
        v.extend(std::iter::repeat_n(tail, 2 * self.s()));
        v
    }
}

impl Objective for LogisticObjective {
    fn dim(&self) -> usize {
        3 * self.s()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let s = self.s();
        self.loss.value(&x[..s]) + self.tau * x[s..].iter().sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.pad(self.loss.gradient(&x[..self.s()]), self.tau)
    }

    fn hessian_apply(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let s = self.s();
        self.pad(self.loss.hessian_apply(&x[..s], &v[..s]), 0.0)
    }

    fn hessian_structure(&self) -> HessianStructure {
        HessianStructure::General
    }

    fn hessian_diagonal(&self, x: &[f64]) -> Vec<f64> {
        self.pad(self.loss.hessian_diagonal(&x[..self.s()]), 0.0)
    }

    fn hessian_matrix(&self, x: &[f64]) -> Option<CscMatrix> {
        let s = self.s();
        let h = self.loss.hessian_matrix(&x[..s]);
        let mut t = Triplets::with_capacity(3 * s, 3 * s, h.nnz());
        t.push_block(0, 0, &h, 1.0);
        Some(t.to_csc())
    }
}

/// `x = [w; d⁺; d⁻]`, w free, `A = [I, −I, I]`, `b = 0`.
pub fn build_logistic_l1(inst: &LogisticInstance) -> Result<ConvexProgram> {
    inst.validate()?;
    let s = inst.features();
    let mut a = Triplets::with_capacity(s, 3 * s, 3 * s);
    for k in 0..s {
        a.push(k, k, 1.0);
        a.push(k, s + k, -1.0);
        a.push(k, 2 * s + k, 1.0);
    }
    let obj = LogisticObjective {
        loss: inst.loss(),
        tau: inst.tau,
    };
    let nonneg = (0..3 * s).map(|j| j >= s).collect();
    ConvexProgram::new(a.to_csc(), vec![0.0; s], nonneg, Box::new(obj))
}
