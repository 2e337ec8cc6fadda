use super::{BlurKernel, LinearOperator, OperatorKind};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::fmt;
use std::sync::Arc;

/// Periodic 2D convolution stored by its eigenvalues (the 2D DFT of the psf).
#[derive(Clone)]
pub struct BccbOperator {
    n1: usize,
    n2: usize,
    psf: Vec<f64>,
    eig: Vec<Complex64>,
    fwd_rows: Arc<dyn Fft<f64>>,
    inv_rows: Arc<dyn Fft<f64>>,
    fwd_cols: Arc<dyn Fft<f64>>,
    inv_cols: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for BccbOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BccbOperator")
            .field("n1", &self.n1)
            .field("n2", &self.n2)
            .finish_non_exhaustive()
    }
}

impl BccbOperator {
    pub fn new(kernel: &BlurKernel) -> Self {
        let (n1, n2) = kernel.grid();
        Self::from_wrapped_psf(kernel.psf().to_vec(), n1, n2)
    }

    /// Any first column (psf wrapped at the origin); no normalization applied.
    pub fn from_wrapped_psf(psf: Vec<f64>, n1: usize, n2: usize) -> Self {
        assert_eq!(psf.len(), n1 * n2);
        let mut planner = FftPlanner::new();
        let mut op = Self {
            n1,
            n2,
            eig: Vec::new(),
            fwd_rows: planner.plan_fft_forward(n2),
            inv_rows: planner.plan_fft_inverse(n2),
            fwd_cols: planner.plan_fft_forward(n1),
            inv_cols: planner.plan_fft_inverse(n1),
            psf,
        };
        let mut buf: Vec<Complex64> = op.psf.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        op.fft2(&mut buf, true);
        op.eig = buf;
        op
    }

    /// Convolution with the entrywise-squared psf. Its transpose applied to
    /// `u` gives `diag(Dᵀ U D)`-type sums `Σ_i D_ij² u_i` in one pass.
    pub fn squared(&self) -> Self {
        Self::from_wrapped_psf(self.psf.iter().map(|v| v * v).collect(), self.n1, self.n2)
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn psf(&self) -> &[f64] {
        &self.psf
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eig
    }

    /// Largest singular value (max |eigenvalue|).
    pub fn norm(&self) -> f64 {
        self.eig.iter().fold(0.0, |m, e| m.max(e.norm()))
    }

    fn fft2(&self, buf: &mut [Complex64], forward: bool) {
        let (rows_plan, cols_plan) = if forward {
            (&self.fwd_rows, &self.fwd_cols)
        } else {
            (&self.inv_rows, &self.inv_cols)
        };
        rows_plan.process(buf);
        let mut col = vec![Complex64::new(0.0, 0.0); self.n1];
        for j in 0..self.n2 {
            for i in 0..self.n1 {
                col[i] = buf[i * self.n2 + j];
            }
            cols_plan.process(&mut col);
            for i in 0..self.n1 {
                buf[i * self.n2 + j] = col[i];
            }
        }
    }

    fn spectral_apply(&self, v: &[f64], out: &mut [f64], conjugate: bool) {
        let n = self.n1 * self.n2;
        let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft2(&mut buf, true);
        for (b, e) in buf.iter_mut().zip(&self.eig) {
            *b *= if conjugate { e.conj() } else { *e };
        }
        self.fft2(&mut buf, false);
        let scale = 1.0 / n as f64;
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = b.re * scale;
        }
    }
}

impl LinearOperator for BccbOperator {
    fn rows(&self) -> usize {
        self.n1 * self.n2
    }

    fn cols(&self) -> usize {
        self.n1 * self.n2
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::BccbConvolution
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.spectral_apply(v, out, false)
    }

    fn apply_transpose_into(&self, u: &[f64], out: &mut [f64]) {
        self.spectral_apply(u, out, true)
    }
}

/// Dense assembly of the circulant matrix directly from the psf:
/// `D[(i,j), (k,l)] = psf[(i-k) mod n1, (j-l) mod n2]`. Test-scale only.
pub fn dense_circulant(psf: &[f64], n1: usize, n2: usize) -> nalgebra::DMatrix<f64> {
    let n = n1 * n2;
    nalgebra::DMatrix::from_fn(n, n, |r, c| {
        let (i, j) = (r / n2, r % n2);
        let (k, l) = (c / n2, c % n2);
        psf[((i + n1 - k) % n1) * n2 + (j + n2 - l) % n2]
    })
}
