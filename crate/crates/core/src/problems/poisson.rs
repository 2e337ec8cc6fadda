use super::split_signed;
use crate::ippmm::{ConvexProgram, HessianStructure, Objective};
use crate::linops::{make_tv_operator, BccbOperator, CscMatrix, LinearOperator, Triplets};
use crate::vecops::norm1;
use crate::{Error, Result};

/// Kullback–Leibler data term `Σ g ln(g / (Dw + a)) + (Dw + a) − g`,
/// with `g ln g = 0` for zero counts. The blur is applied through FFTs and
/// the Hessian `DᵀU²D`, `U = diag(√g / (Dw + a))`, is never formed.
#[derive(Debug, Clone)]
pub struct KlDivergence {
    blur: BccbOperator,
    blur_sq: BccbOperator,
    g: Vec<f64>,
    a: Vec<f64>,
}

impl KlDivergence {
    pub fn new(blur: BccbOperator, g: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        let n = blur.rows();
        if g.len() != n || a.len() != n {
            return Err(Error::dims(format!("blur acts on {n} pixels, g has {}, a has {}", g.len(), a.len())));
        }
        if g.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::invalid("observed counts must be non-negative"));
        }
        if a.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("background must be positive"));
        }
        Ok(Self {
            blur_sq: blur.squared(),
            blur,
            g,
            a,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn blur(&self) -> &BccbOperator {
        &self.blur
    }

    pub fn counts(&self) -> &[f64] {
        &self.g
    }

    pub fn background(&self) -> &[f64] {
        &self.a
    }

    /// `Dw + a`, or a domain error if any entry is non-positive.
    pub fn intensity(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mut v = self.blur.apply(w);
        for (k, (vi, ai)) in v.iter_mut().zip(&self.a).enumerate() {
            *vi += ai;
            if !(*vi > 0.0) {
                return Err(Error::Domain(format!("non-positive intensity {vi:e} at pixel {k}")));
            }
        }
        Ok(v)
    }

    fn value_at(&self, v: &[f64]) -> f64 {
        v.iter()
            .zip(&self.g)
            .map(|(&vi, &gi)| if gi > 0.0 { gi * (gi / vi).ln() + vi - gi } else { vi })
            .sum()
    }

    pub fn value(&self, w: &[f64]) -> Result<f64> {
        Ok(self.value_at(&self.intensity(w)?))
    }

    /// `Dᵀ(e − g/(Dw + a))`.
    pub fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        let v = self.intensity(w)?;
        let r: Vec<f64> = v.iter().zip(&self.g).map(|(vi, gi)| 1.0 - gi / vi).collect();
        Ok(self.blur.apply_transpose(&r))
    }

    /// `U(w)² = g / (Dw + a)²`.
    pub fn u_squared(&self, w: &[f64]) -> Result<Vec<f64>> {
        let v = self.intensity(w)?;
        Ok(v.iter().zip(&self.g).map(|(vi, gi)| gi / (vi * vi)).collect())
    }

    pub fn hessian_apply(&self, w: &[f64], dw: &[f64]) -> Result<Vec<f64>> {
        let u2 = self.u_squared(w)?;
        let mut t = self.blur.apply(dw);
        for (ti, ui) in t.iter_mut().zip(&u2) {
            *ti *= ui;
        }
        Ok(self.blur.apply_transpose(&t))
    }

    /// `diag(DᵀU²D)_j = Σ_i D_ij² U_i²`.
    pub fn hessian_diagonal(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(self.blur_sq.apply_transpose(&self.u_squared(w)?))
    }
}

/// Value, gradient and a Hessian-action closure at `w`.
pub fn kl_oracle<'a>(
    w: &[f64],
    kl: &'a KlDivergence,
) -> Result<(f64, Vec<f64>, impl Fn(&[f64]) -> Vec<f64> + 'a)> {
    let v = kl.intensity(w)?;
    let value = kl.value_at(&v);
    let r: Vec<f64> = v.iter().zip(&kl.g).map(|(vi, gi)| 1.0 - gi / vi).collect();
    let grad = kl.blur.apply_transpose(&r);
    let u2: Vec<f64> = v.iter().zip(&kl.g).map(|(vi, gi)| gi / (vi * vi)).collect();
    let hess = move |dw: &[f64]| {
        let mut t = kl.blur.apply(dw);
        for (ti, ui) in t.iter_mut().zip(&u2) {
            *ti *= ui;
        }
        kl.blur.apply_transpose(&t)
    };
    Ok((value, grad, hess))
}

/// `min D_KL(w) + λ‖Lw‖₁ s.t. eᵀw = r, w ≥ 0` on an `n1 × n2` image.
#[derive(Debug, Clone)]
pub struct PoissonTvInstance {
    pub kl: KlDivergence,
    pub lambda: f64,
}

impl PoissonTvInstance {
    pub fn new(blur: BccbOperator, g: Vec<f64>, background: Vec<f64>, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::invalid("TV weight must be non-negative"));
        }
        Ok(Self {
            kl: KlDivergence::new(blur, g, background)?,
            lambda,
        })
    }

    pub fn grid(&self) -> (usize, usize) {
        self.kl.blur.grid()
    }

    pub fn pixels(&self) -> usize {
        self.kl.dim()
    }

    pub fn tv(&self) -> CscMatrix {
        let (n1, n2) = self.grid();
        make_tv_operator(&[n1, n2]).expect("image grid").into_matrix()
    }

    /// Total intensity `r = Σ(g − a)`.
    pub fn total_intensity(&self) -> f64 {
        self.kl.g.iter().zip(&self.kl.a).map(|(g, a)| g - a).sum()
    }

    pub fn objective(&self, w: &[f64]) -> Result<f64> {
        Ok(self.kl.value(w)? + self.lambda * norm1(&self.tv().apply(w)))
    }

    /// `x = [w; d⁺; d⁻]` with `d = Lw`.
    pub fn lift(&self, w: &[f64]) -> Vec<f64> {
        let (dp, dm) = split_signed(&self.tv().apply(w));
        [w.to_vec(), dp, dm].concat()
    }

    pub fn image(&self, x: &[f64]) -> Vec<f64> {
        x[..self.pixels()].to_vec()
    }
}

/// Smooth split objective `D_KL(w) + λ eᵀ(d⁺ + d⁻)`.
#[derive(Debug, Clone)]
pub struct PoissonObjective {
    kl: KlDivergence,
    lambda: f64,
    l: usize,
}

impl PoissonObjective {
    pub fn kl(&self) -> &KlDivergence {
        &self.kl
    }

    fn w<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.kl.dim()]
    }

    fn pad(&self, mut v: Vec<f64>, tail: f64) -> Vec<f64> {
        v.extend(std::iter::repeat_n(tail, 2 * self.l));
        v
    }
}

impl Objective for PoissonObjective {
    fn dim(&self) -> usize {
        self.kl.dim() + 2 * self.l
    }

    fn value(&self, x: &[f64]) -> f64 {
        let tv: f64 = x[self.kl.dim()..].iter().sum();
        self.kl.value(self.w(x)).unwrap_or(f64::NAN) + self.lambda * tv
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let g = self
            .kl
            .gradient(self.w(x))
            .unwrap_or_else(|_| vec![f64::NAN; self.kl.dim()]);
        self.pad(g, self.lambda)
    }

    fn hessian_apply(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let h = self
            .kl
            .hessian_apply(self.w(x), &v[..self.kl.dim()])
            .unwrap_or_else(|_| vec![f64::NAN; self.kl.dim()]);
        self.pad(h, 0.0)
    }

    fn hessian_structure(&self) -> HessianStructure {
        HessianStructure::General
    }

    fn hessian_diagonal(&self, x: &[f64]) -> Vec<f64> {
        let d = self
            .kl
            .hessian_diagonal(self.w(x))
            .unwrap_or_else(|_| vec![f64::NAN; self.kl.dim()]);
        self.pad(d, 0.0)
    }

    fn hessian_diagonal_approx(&self, x: &[f64]) -> Vec<f64> {
        let d = self
            .kl
            .u_squared(self.w(x))
            .unwrap_or_else(|_| vec![f64::NAN; self.kl.dim()]);
        self.pad(d, 0.0)
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        self.kl.intensity(self.w(x)).is_ok()
    }
}

/// `x = [w; d⁺; d⁻] ≥ 0`, `A = [[eᵀ, 0, 0], [L, −I, I]]`, `b = [r; 0]`.
/// The start is `w⁰ = max(g, floor)` with `d±` from `Lw⁰` plus an offset.
pub fn build_poisson_tv(inst: &PoissonTvInstance) -> Result<ConvexProgram> {
    let r = inst.total_intensity();
    if !(r > 0.0) {
        return Err(Error::invalid(format!("total intensity r = {r:e} must be positive")));
    }
    let n = inst.pixels();
    let tv = inst.tv();
    let l = tv.nrows();
    let mut a = Triplets::with_capacity(l + 1, n + 2 * l, n + tv.nnz() + 2 * l);
    for j in 0..n {
        a.push(0, j, 1.0);
    }
    a.push_block(1, 0, &tv, 1.0);
    for k in 0..l {
        a.push(1 + k, n + k, -1.0);
        a.push(1 + k, n + l + k, 1.0);
    }
    let mut b = vec![0.0; l + 1];
    b[0] = r;
    let obj = PoissonObjective {
        kl: inst.kl.clone(),
        lambda: inst.lambda,
        l,
    };
    let program = ConvexProgram::new(a.to_csc(), b, vec![true; n + 2 * l], Box::new(obj))?;
    let start = restoration_start(inst, &tv);
    program.with_start(start)
}

fn restoration_start(inst: &PoissonTvInstance, tv: &CscMatrix) -> crate::ippmm::StartPoint {
    let gmax = inst.kl.g.iter().fold(0.0f64, |m, &v| m.max(v));
    let floor = 1e-2 * gmax.max(1e-8);
    let w: Vec<f64> = inst.kl.g.iter().map(|&g| g.max(floor)).collect();
    let (dp, dm) = split_signed(&tv.apply(&w));
    let mut x = w;
    x.extend(dp.into_iter().map(|v| v + floor));
    x.extend(dm.into_iter().map(|v| v + floor));
    let z = vec![1.0; x.len()];
    crate::ippmm::StartPoint {
        x,
        y: vec![0.0; tv.nrows() + 1],
        z,
    }
}
