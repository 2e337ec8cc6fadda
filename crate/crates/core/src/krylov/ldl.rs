use super::ordering::minimum_degree;
use crate::linops::CscMatrix;
use crate::{Error, Result};

const NONE: usize = usize::MAX;

/// Pivot policy for the numeric factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdlMode {
    /// Every pivot must be positive (Cholesky-equivalent).
    Positive,
    /// Pivots of either sign are accepted; only zero pivots fail.
    /// Quasi-definite matrices factor stably under any ordering.
    QuasiDefinite,
}

/// Fill-reducing ordering plus the elimination tree of the permuted pattern.
#[derive(Debug, Clone)]
pub struct SymbolicLdl {
    n: usize,
    perm: Vec<usize>,
    iperm: Vec<usize>,
    // pattern of the permuted upper triangle the tree was built for
    up_colptr: Vec<usize>,
    up_rowind: Vec<usize>,
    etree: Vec<usize>,
    lnz: Vec<usize>,
}

/// Numeric `P A Pᵀ = L D Lᵀ` with unit lower triangular `L`.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    sym: SymbolicLdl,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
}

fn permuted_upper(a: &CscMatrix, iperm: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let n = a.ncols();
    let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(a.nnz());
    for (i, j, v) in a.iter() {
        let (pi, pj) = (iperm[i], iperm[j]);
        // use the upper triangle of the original matrix only
        if i <= j {
            entries.push((pi.min(pj), pi.max(pj), v));
        }
    }
    entries.sort_unstable_by_key(|e| (e.1, e.0));
    let mut counts = vec![0usize; n + 1];
    let mut rowind = Vec::with_capacity(entries.len());
    let mut values: Vec<f64> = Vec::with_capacity(entries.len());
    let mut last = None;
    for (r, c, v) in entries {
        if last == Some((r, c)) {
            *values.last_mut().unwrap() += v;
            continue;
        }
        last = Some((r, c));
        rowind.push(r);
        values.push(v);
        counts[c + 1] += 1;
    }
    for c in 0..n {
        counts[c + 1] += counts[c];
    }
    (counts, rowind, values)
}

fn elimination_tree(n: usize, colptr: &[usize], rowind: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut work = vec![NONE; n];
    let mut lnz = vec![0usize; n];
    let mut etree = vec![NONE; n];
    for j in 0..n {
        work[j] = j;
        for &r in &rowind[colptr[j]..colptr[j + 1]] {
            let mut i = r;
            while i != j && work[i] != j {
                if etree[i] == NONE {
                    etree[i] = j;
                }
                lnz[i] += 1;
                work[i] = j;
                i = etree[i];
            }
        }
    }
    (etree, lnz)
}

impl SymbolicLdl {
    /// Orders the pattern of the symmetric matrix `a` by minimum degree.
    /// Only the upper triangle of `a` is read, here and in `factor_with`.
    pub fn analyze(a: &CscMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::dims(format!("LDL needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
        }
        let perm = minimum_degree(a);
        Ok(Self::with_ordering(a, perm))
    }

    /// Uses the natural ordering.
    pub fn analyze_natural(a: &CscMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::dims("LDL needs a square matrix"));
        }
        Ok(Self::with_ordering(a, (0..a.ncols()).collect()))
    }

    fn with_ordering(a: &CscMatrix, perm: Vec<usize>) -> Self {
        let n = a.ncols();
        let mut iperm = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }
        let (up_colptr, up_rowind, _) = permuted_upper(a, &iperm);
        let (etree, lnz) = elimination_tree(n, &up_colptr, &up_rowind);
        Self {
            n,
            perm,
            iperm,
            up_colptr,
            up_rowind,
            etree,
            lnz,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Strictly-lower nonzeros of `L`.
    pub fn factor_nnz(&self) -> usize {
        self.lnz.iter().sum()
    }

    /// Numeric factorization of `a`, reusing this ordering. The elimination
    /// tree is rebuilt only when the pattern differs from the analysed one.
    pub fn factor_with(&self, a: &CscMatrix, mode: LdlMode) -> Result<LdlFactor> {
        if a.ncols() != self.n || a.nrows() != self.n {
            return Err(Error::dims("matrix does not match the symbolic analysis"));
        }
        let (colptr, rowind, values) = permuted_upper(a, &self.iperm);
        let sym = if colptr == self.up_colptr && rowind == self.up_rowind {
            self.clone()
        } else {
            let (etree, lnz) = elimination_tree(self.n, &colptr, &rowind);
            Self {
                up_colptr: colptr.clone(),
                up_rowind: rowind.clone(),
                etree,
                lnz,
                ..self.clone()
            }
        };
        numeric(sym, &colptr, &rowind, &values, mode)
    }
}

fn numeric(
    sym: SymbolicLdl,
    ap: &[usize],
    ai: &[usize],
    ax: &[f64],
    mode: LdlMode,
) -> Result<LdlFactor> {
    let n = sym.n;
    let mut lp = vec![0usize; n + 1];
    for i in 0..n {
        lp[i + 1] = lp[i] + sym.lnz[i];
    }
    let total = lp[n];
    let mut li = vec![0usize; total];
    let mut lx = vec![0.0; total];
    let mut d = vec![0.0; n];
    let mut dinv = vec![0.0; n];
    let mut next_space: Vec<usize> = lp[..n].to_vec();
    let mut y_used = vec![false; n];
    let mut y_vals = vec![0.0; n];
    let mut y_idx = vec![0usize; n];
    let mut elim = vec![0usize; n];

    for k in 0..n {
        let mut nnz_y = 0;
        for p in ap[k]..ap[k + 1] {
            let b = ai[p];
            if b == k {
                d[k] = ax[p];
                continue;
            }
            y_vals[b] = ax[p];
            if !y_used[b] {
                y_used[b] = true;
                elim[0] = b;
                let mut nnz_e = 1;
                let mut next = sym.etree[b];
                while next != NONE && next < k {
                    if y_used[next] {
                        break;
                    }
                    y_used[next] = true;
                    elim[nnz_e] = next;
                    nnz_e += 1;
                    next = sym.etree[next];
                }
                while nnz_e > 0 {
                    nnz_e -= 1;
                    y_idx[nnz_y] = elim[nnz_e];
                    nnz_y += 1;
                }
            }
        }
        for t in (0..nnz_y).rev() {
            let c = y_idx[t];
            let end = next_space[c];
            let yc = y_vals[c];
            for q in lp[c]..end {
                y_vals[li[q]] -= lx[q] * yc;
            }
            li[end] = k;
            lx[end] = yc * dinv[c];
            d[k] -= yc * lx[end];
            next_space[c] += 1;
            y_vals[c] = 0.0;
            y_used[c] = false;
        }
        let dk = d[k];
        let bad = match mode {
            LdlMode::Positive => !(dk > 0.0),
            LdlMode::QuasiDefinite => dk == 0.0,
        };
        if bad || !dk.is_finite() {
            let pivot = sym.perm[k];
            return Err(match mode {
                LdlMode::Positive => Error::NotPositiveDefinite { pivot, value: dk },
                LdlMode::QuasiDefinite => Error::SingularPivot { pivot },
            });
        }
        dinv[k] = 1.0 / dk;
    }
    Ok(LdlFactor {
        sym,
        lp,
        li,
        lx,
        d,
        dinv,
    })
}

impl LdlFactor {
    pub fn dim(&self) -> usize {
        self.sym.n
    }

    /// Pivots of `D` in factorization order.
    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn symbolic(&self) -> &SymbolicLdl {
        &self.sym
    }

    /// Number of negative pivots (the inertia's negative count).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    pub fn solve_into(&self, rhs: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let mut x: Vec<f64> = (0..n).map(|k| rhs[self.sym.perm[k]]).collect();
        for i in 0..n {
            let xi = x[i];
            if xi != 0.0 {
                for q in self.lp[i]..self.lp[i + 1] {
                    x[self.li[q]] -= self.lx[q] * xi;
                }
            }
        }
        for (xi, di) in x.iter_mut().zip(&self.dinv) {
            *xi *= di;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for q in self.lp[i]..self.lp[i + 1] {
                s -= self.lx[q] * x[self.li[q]];
            }
            x[i] = s;
        }
        for k in 0..n {
            out[self.sym.perm[k]] = x[k];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.solve_into(rhs, &mut out);
        out
    }
}

/// One-shot sparse Cholesky solve of an SPD matrix.
pub fn cholesky_solve(m: &CscMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != m.nrows() {
        return Err(Error::dims("rhs length does not match the matrix"));
    }
    let f = SymbolicLdl::analyze(m)?.factor_with(m, LdlMode::Positive)?;
    Ok(f.solve(rhs))
}
