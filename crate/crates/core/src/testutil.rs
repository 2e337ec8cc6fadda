//! Shared helpers for unit tests: random programs and dense oracles.

use crate::ippmm::{ConvexProgram, QuadraticObjective};
use crate::linops::CscMatrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dense(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Feasible QP with `Q = BBᵀ/n (+ diagonal)`, random `A`, `b = A x₀` for
/// a positive `x₀`. `diagonal_q` keeps only the diagonal of Q.
pub fn random_qp(seed: u64, n: usize, m: usize, n_free: usize, diagonal_q: bool) -> ConvexProgram {
    let mut r = rng(seed);
    let b = dense(&mut r, n, n);
    let mut q = &b * b.transpose() / n as f64;
    if diagonal_q {
        q = DMatrix::from_diagonal(&q.diagonal());
    }
    let c = random_vec(&mut r, n, -1.0, 1.0);
    let a = dense(&mut r, m, n);
    let x0 = DVector::from_vec(random_vec(&mut r, n, 0.5, 1.5));
    let rhs = (&a * x0).as_slice().to_vec();
    let nonneg = (0..n).map(|j| j >= n_free).collect();
    let obj = QuadraticObjective::new(CscMatrix::from_dense(&q), c).unwrap();
    ConvexProgram::new(CscMatrix::from_dense(&a), rhs, nonneg, Box::new(obj)).unwrap()
}

pub struct OracleSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// KKT sign conditions hold on the guessed support.
    pub certified: bool,
}

/// Dense equality-constrained solve on the support `{free} ∪ {x_j > thresh}`,
/// followed by a sign check of the primal values and reduced costs.
pub fn active_set_oracle(q: &DMatrix<f64>, c: &[f64], program: &ConvexProgram, guess: &[f64], thresh: f64) -> OracleSolution {
    let (n, m) = (program.n(), program.m());
    let a = program.a.to_dense();
    let support: Vec<usize> = (0..n).filter(|&j| !program.nonneg[j] || guess[j] > thresh).collect();
    let k = support.len();
    let mut kkt = DMatrix::zeros(k + m, k + m);
    let mut rhs = DVector::zeros(k + m);
    for (p, &i) in support.iter().enumerate() {
        for (s, &j) in support.iter().enumerate() {
            kkt[(p, s)] = q[(i, j)];
        }
        for r in 0..m {
            kkt[(p, k + r)] = -a[(r, i)];
            kkt[(k + r, p)] = a[(r, i)];
        }
        rhs[p] = -c[i];
    }
    for r in 0..m {
        rhs[k + r] = program.b[r];
    }
    let sol = kkt.svd(true, true).solve(&rhs, 1e-12).unwrap();
    let mut x = vec![0.0; n];
    for (p, &i) in support.iter().enumerate() {
        x[i] = sol[p];
    }
    let y: Vec<f64> = (0..m).map(|r| sol[k + r]).collect();
    let xv = DVector::from_column_slice(&x);
    let grad = q * &xv + DVector::from_column_slice(c);
    let reduced = &grad - a.transpose() * DVector::from_column_slice(&y);
    let residual = (&a * &xv - DVector::from_column_slice(&program.b)).norm();
    let certified = residual <= 1e-8 * (1.0 + program.b.iter().map(|v| v * v).sum::<f64>().sqrt())
        && (0..n).all(|j| !program.nonneg[j] || (x[j] >= -1e-10 && reduced[j] >= -1e-8));
    let objective = 0.5 * xv.dot(&(q * &xv)) + xv.dot(&DVector::from_column_slice(c));
    OracleSolution {
        x,
        objective,
        certified,
    }
}
