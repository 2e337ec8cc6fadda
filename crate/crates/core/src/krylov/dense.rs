use crate::{Error, Result};
use nalgebra::DMatrix;

/// Dense lower Cholesky factor `M = L Lᵀ`, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    l: DMatrix<f64>,
}

impl DenseCholesky {
    /// Factors the lower triangle of `m`; the upper triangle is ignored.
    pub fn factor(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::dims(format!("Cholesky needs a square matrix, got {}x{}", n, m.ncols())));
        }
        let mut l = m.clone();
        for j in 0..n {
            let mut d = l[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = l[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
            for i in 0..j {
                l[(i, j)] = 0.0;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[(i, k)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
