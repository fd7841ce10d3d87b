//! Compressed-row sparse matrices and the linear solvers used by assembly
//! and time stepping.
//!
//! Direct factorizations are delegated to `faer`'s supernodal sparse LU.
//! The CSR arrays of `A` are handed to `faer` as the CSC arrays of `A^T`,
//! so no format conversion is needed; solves go through the transposed path.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse matrix in compressed-row form with sorted, unique column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) outside {nrows}x{ncols}");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut next = counts.clone();
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            scratch.clear();
            scratch.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_unstable_by_key(|e| e.0);
            for &(c, v) in &scratch {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Zero-valued matrix with the given per-row column sets (sorted and deduplicated here).
    pub fn from_pattern(nrows: usize, ncols: usize, mut rows: Vec<Vec<usize>>) -> Self {
        assert_eq!(rows.len(), nrows);
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            if let Some(&c) = r.last() {
                assert!(c < ncols);
            }
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    /// Storage offset of entry `(r, c)` if it is in the pattern.
    pub fn find(&self, r: usize, c: usize) -> Option<usize> {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        self.col_idx[lo..hi].binary_search(&c).ok().map(|k| lo + k)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.find(r, c).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to an entry that must already be in the pattern.
    #[inline]
    pub fn add_to(&mut self, r: usize, c: usize, v: f64) {
        let k = self
            .find(r, c)
            .unwrap_or_else(|| panic!("entry ({r},{c}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn fill_zero(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.scale(s);
        m
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    /// `self += s * other`; patterns may differ.
    pub fn add_scaled(&self, s: f64, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        if self.same_pattern(other) {
            let mut m = self.clone();
            for (a, b) in m.values.iter_mut().zip(&other.values) {
                *a += s * b;
            }
            return m;
        }
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.nrows {
            trip.extend(self.row(r).map(|(c, v)| (r, c, v)));
            trip.extend(other.row(r).map(|(c, v)| (r, c, s * v)));
        }
        CsrMatrix::from_triplets(self.nrows, self.ncols, &trip)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = s;
        }
    }

    /// `y = A^T x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                col_idx[next[c]] = r;
                values[next[c]] = self.values[k];
                next[c] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                d[r][c] += v;
            }
        }
        d
    }

    /// Replaces the listed rows by identity rows.
    pub fn set_identity_rows(&mut self, rows: &[usize]) {
        for &r in rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                self.values[k] = if self.col_idx[k] == r { 1.0 } else { 0.0 };
            }
            assert!(self.find(r, r).is_some(), "row {r} has no diagonal slot");
        }
    }

    /// Symmetric part `(A + A^T)/2` check, returning the largest asymmetry.
    pub fn max_asymmetry(&self) -> f64 {
        let t = self.transpose();
        let d = self.add_scaled(-1.0, &t);
        d.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Stacks a grid of blocks into one matrix. `None` blocks are zero.
    pub fn block(blocks: &[Vec<Option<&CsrMatrix>>]) -> CsrMatrix {
        let nbr = blocks.len();
        let nbc = blocks[0].len();
        let mut heights = vec![usize::MAX; nbr];
        let mut widths = vec![usize::MAX; nbc];
        for (i, row) in blocks.iter().enumerate() {
            assert_eq!(row.len(), nbc);
            for (j, b) in row.iter().enumerate() {
                if let Some(b) = b {
                    assert!(heights[i] == usize::MAX || heights[i] == b.nrows);
                    assert!(widths[j] == usize::MAX || widths[j] == b.ncols);
                    heights[i] = b.nrows;
                    widths[j] = b.ncols;
                }
            }
        }
        assert!(heights.iter().chain(&widths).all(|&s| s != usize::MAX), "empty block row/column");
        let row_off: Vec<usize> = offsets(&heights);
        let col_off: Vec<usize> = offsets(&widths);
        let nrows = row_off[nbr];
        let ncols = col_off[nbc];
        let nnz: usize = blocks.iter().flatten().flatten().map(|b| b.nnz()).sum();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for (bi, row) in blocks.iter().enumerate() {
            for r in 0..heights[bi] {
                for (bj, b) in row.iter().enumerate() {
                    if let Some(b) = b {
                        for (c, v) in b.row(r) {
                            col_idx.push(col_off[bj] + c);
                            values.push(v);
                        }
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sizes.len() + 1);
    out.push(0);
    for s in sizes {
        out.push(out.last().unwrap() + s);
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Sparse LU factorization with partial pivoting.
pub struct LuFactor {
    n: usize,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for LuFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuFactor").field("n", &self.n).finish_non_exhaustive()
    }
}

/// Reusable symbolic analysis for matrices sharing one sparsity pattern.
#[derive(Clone)]
pub struct LuSymbolic {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic: SymbolicLu<usize>,
}

impl LuSymbolic {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::DimensionMismatch {
                expected: a.nrows,
                got: a.ncols,
            });
        }
        let sym = SymbolicSparseColMatRef::new_checked(a.ncols, a.nrows, &a.row_ptr, None, &a.col_idx);
        let symbolic = SymbolicLu::try_new(sym).map_err(|e| Error::Singular(format!("{e:?}")))?;
        Ok(Self {
            n: a.nrows,
            row_ptr: a.row_ptr.clone(),
            col_idx: a.col_idx.clone(),
            symbolic,
        })
    }

    pub fn matches(&self, a: &CsrMatrix) -> bool {
        a.nrows == self.n && a.row_ptr == self.row_ptr && a.col_idx == self.col_idx
    }

    pub fn factor(&self, a: &CsrMatrix) -> Result<LuFactor> {
        assert!(self.matches(a), "matrix pattern differs from symbolic analysis");
        let sym = SymbolicSparseColMatRef::new_checked(a.ncols, a.nrows, &a.row_ptr, None, &a.col_idx);
        let mat = SparseColMatRef::new(sym, &a.values);
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), mat)
            .map_err(|e| Error::Singular(format!("{e:?}")))?;
        Ok(LuFactor { n: self.n, lu })
    }
}

impl LuFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        LuSymbolic::new(a)?.factor(a)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let rhs = MatMut::from_column_major_slice_mut(b, self.n, 1);
        // the factorization is of A^T (see module docs)
        self.lu.solve_transpose_in_place(rhs);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Linear solver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearMethod {
    DirectLu,
    Gmres,
    ConjugateGradient,
    Minres,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSolverConfig {
    pub method: LinearMethod,
    pub rel_tol: f64,
    pub max_iters: usize,
    pub restart: usize,
}

impl Default for LinearSolverConfig {
    fn default() -> Self {
        Self {
            method: LinearMethod::DirectLu,
            rel_tol: 1e-12,
            max_iters: 2000,
            restart: 50,
        }
    }
}

impl LinearSolverConfig {
    pub fn with_method(method: LinearMethod) -> Self {
        Self {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "linear tolerance must be positive, got {}",
                self.rel_tol
            )));
        }
        if self.restart == 0 || self.max_iters == 0 {
            return Err(Error::InvalidParameter("restart and max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of a linear solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||A x - b|| / ||b||` (zero right-hand side reports the absolute residual).
    pub rel_residual: f64,
    pub history: Vec<f64>,
}

/// Anything applying an approximate inverse.
pub trait Preconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64>;
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        r.to_vec()
    }
}

/// Jacobi (inverse of `|diag|`) preconditioner.
pub struct DiagonalPreconditioner {
    inv: Vec<f64>,
}

impl DiagonalPreconditioner {
    pub fn new(a: &CsrMatrix) -> Self {
        Self {
            inv: a
                .diagonal_values()
                .iter()
                .map(|&d| if d.abs() > 0.0 { 1.0 / d.abs() } else { 1.0 })
                .collect(),
        }
    }
}

impl Preconditioner for DiagonalPreconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        r.iter().zip(&self.inv).map(|(a, b)| a * b).collect()
    }
}

impl Preconditioner for LuFactor {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        self.solve(r)
    }
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut r = a.matvec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri -= bi;
    }
    let nb = norm2(b);
    if nb > 0.0 {
        norm2(&r) / nb
    } else {
        norm2(&r)
    }
}

/// Solves `A x = b` with the configured method.
pub fn solve(a: &CsrMatrix, b: &[f64], cfg: &LinearSolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if a.nrows != a.ncols {
        return Err(Error::DimensionMismatch {
            expected: a.nrows,
            got: a.ncols,
        });
    }
    if b.len() != a.nrows {
        return Err(Error::DimensionMismatch {
            expected: a.nrows,
            got: b.len(),
        });
    }
    match cfg.method {
        LinearMethod::DirectLu => {
            let lu = LuFactor::new(a)?;
            let x = lu.solve(b);
            let rel = relative_residual(a, &x, b);
            if !rel.is_finite() {
                return Err(Error::Singular("non-finite solution from LU".into()));
            }
            Ok(SolveReport {
                x,
                iterations: 1,
                rel_residual: rel,
                history: vec![rel],
            })
        }
        LinearMethod::Gmres => gmres(a, b, None, &IdentityPreconditioner, cfg),
        LinearMethod::ConjugateGradient => conjugate_gradient(a, b, &DiagonalPreconditioner::new(a), cfg),
        LinearMethod::Minres => minres(a, b, &DiagonalPreconditioner::new(a), cfg),
    }
}

/// Preconditioned conjugate gradients for SPD systems.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    precond: &dyn Preconditioner,
    cfg: &LinearSolverConfig,
) -> Result<SolveReport> {
    let n = b.len();
    let nb = norm2(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok(SolveReport { x, iterations: 0, rel_residual: 0.0, history: vec![0.0] });
    }
    let mut r = b.to_vec();
    let mut z = precond.apply(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = vec![1.0];
    let mut ap = vec![0.0; n];
    for it in 1..=cfg.max_iters {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::LinearSolver { iterations: it, residual: *history.last().unwrap(), history });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rel = norm2(&r) / nb;
        history.push(rel);
        if rel <= cfg.rel_tol {
            return Ok(SolveReport { x, iterations: it, rel_residual: rel, history });
        }
        z = precond.apply(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::LinearSolver { iterations: cfg.max_iters, residual: *history.last().unwrap(), history })
}

/// Restarted GMRES with right preconditioning.
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    precond: &dyn Preconditioner,
    cfg: &LinearSolverConfig,
) -> Result<SolveReport> {
    let n = b.len();
    let nb = norm2(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    if nb == 0.0 && x0.is_none() {
        return Ok(SolveReport { x, iterations: 0, rel_residual: 0.0, history: vec![0.0] });
    }
    let scale = if nb > 0.0 { nb } else { 1.0 };
    let m = cfg.restart.max(1);
    let mut history = Vec::new();
    let mut total = 0usize;
    loop {
        let mut r = a.matvec(&x);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm2(&r);
        let rel = beta / scale;
        history.push(rel);
        if rel <= cfg.rel_tol {
            return Ok(SolveReport { x, iterations: total, rel_residual: rel, history });
        }
        if total >= cfg.max_iters {
            return Err(Error::LinearSolver { iterations: total, residual: rel, history });
        }
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for j in 0..m {
            let z = precond.apply(&v[j]);
            let mut w = a.matvec(&z);
            zs.push(z);
            // modified Gram-Schmidt, two passes for robustness near convergence
            for _ in 0..2 {
                for i in 0..=j {
                    let hij = dot(&w, &v[i]);
                    h[i][j] += hij;
                    axpy(-hij, &v[i], &mut w);
                }
            }
            let hn = norm2(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let den = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            if den == 0.0 {
                k_used = j;
                break;
            }
            cs[j] = h[j][j] / den;
            sn[j] = h[j + 1][j] / den;
            h[j][j] = den;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            total += 1;
            k_used = j + 1;
            let est = g[j + 1].abs() / scale;
            history.push(est);
            if est <= cfg.rel_tol || total >= cfg.max_iters || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        // back substitution
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for l in i + 1..k_used {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        for (yi, z) in y.iter().zip(&zs) {
            axpy(*yi, z, &mut x);
        }
        if k_used == 0 {
            let rel = *history.last().unwrap();
            return Err(Error::LinearSolver { iterations: total, residual: rel, history });
        }
    }
}

/// Preconditioned MINRES for symmetric (possibly indefinite) systems.
/// The preconditioner must be symmetric positive definite.
pub fn minres(
    a: &CsrMatrix,
    b: &[f64],
    precond: &dyn Preconditioner,
    cfg: &LinearSolverConfig,
) -> Result<SolveReport> {
    let n = b.len();
    let nb = norm2(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok(SolveReport { x, iterations: 0, rel_residual: 0.0, history: vec![0.0] });
    }
    // Paige-Saunders recurrence
    let mut r1 = b.to_vec();
    let mut y = precond.apply(&r1);
    let mut beta1 = dot(&r1, &y);
    if beta1 <= 0.0 {
        return Err(Error::LinearSolver { iterations: 0, residual: 1.0, history: vec![1.0] });
    }
    beta1 = beta1.sqrt();
    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut history = vec![1.0];
    let mut v = vec![0.0; n];
    for it in 1..=cfg.max_iters {
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = yi / beta;
        }
        y = a.matvec(&v);
        if it >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        r1 = std::mem::replace(&mut r2, y.clone());
        y = precond.apply(&r2);
        oldb = beta;
        beta = dot(&r2, &y);
        if beta < 0.0 {
            return Err(Error::LinearSolver { iterations: it, residual: *history.last().unwrap(), history });
        }
        beta = beta.sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
        }
        axpy(phi, &w, &mut x);
        // phibar estimates the preconditioned residual; confirm with the true one
        let est = phibar / beta1;
        history.push(est);
        if est <= cfg.rel_tol {
            let rel = relative_residual(a, &x, b);
            if rel <= cfg.rel_tol * 10.0 {
                return Ok(SolveReport { x, iterations: it, rel_residual: rel, history });
            }
        }
    }
    Err(Error::LinearSolver { iterations: cfg.max_iters, residual: *history.last().unwrap(), history })
}

/// Factored saddle-point operator
/// `[A B^T 0; B 0 c; 0 c^T 0]`, where `c` pins the mean of the multiplier
/// block. Dirichlet rows of `A` are replaced by identity rows and the
/// matching columns of `B^T` are zeroed.
pub struct SaddleSolver {
    n_u: usize,
    n_p: usize,
    matrix: CsrMatrix,
    lu: LuFactor,
}

impl std::fmt::Debug for SaddleSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SaddleSolver").field("n_u", &self.n_u).field("n_p", &self.n_p).finish()
    }
}

/// Solution of a saddle system.
#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub multiplier: f64,
    pub rel_residual: f64,
}

impl SaddleSolver {
    /// `a`: velocity block (`n_u x n_u`), `b`: constraint block (`n_p x n_u`),
    /// `mean_weights`: `int psi_q`, `fixed`: Dirichlet velocity rows.
    pub fn new(a: &CsrMatrix, b: &CsrMatrix, mean_weights: &[f64], fixed: &[usize]) -> Result<Self> {
        let n_u = a.nrows();
        let n_p = b.nrows();
        if b.ncols() != n_u || mean_weights.len() != n_p {
            return Err(Error::DimensionMismatch { expected: n_u, got: b.ncols() });
        }
        let mut a = a.clone();
        a.set_identity_rows(fixed);
        let mut bt = b.transpose();
        for &r in fixed {
            for k in bt.row_ptr[r]..bt.row_ptr[r + 1] {
                bt.values[k] = 0.0;
            }
        }
        let c_col = CsrMatrix::from_triplets(
            n_p,
            1,
            &mean_weights.iter().enumerate().map(|(i, &w)| (i, 0, w)).collect::<Vec<_>>(),
        );
        let c_row = c_col.transpose();
        let zero_pp = CsrMatrix::zeros(n_p, n_p);
        let zero_11 = CsrMatrix::zeros(1, 1);
        let matrix = CsrMatrix::block(&[
            vec![Some(&a), Some(&bt), None],
            vec![Some(b), Some(&zero_pp), Some(&c_col)],
            vec![None, Some(&c_row), Some(&zero_11)],
        ]);
        let lu = LuFactor::new(&matrix)?;
        Ok(Self { n_u, n_p, matrix, lu })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Solves with velocity load `f` (Dirichlet rows carry the prescribed
    /// values) and constraint load `g`.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> Result<SaddleSolution> {
        assert_eq!(f.len(), self.n_u);
        assert_eq!(g.len(), self.n_p);
        let mut rhs = Vec::with_capacity(self.n_u + self.n_p + 1);
        rhs.extend_from_slice(f);
        rhs.extend_from_slice(g);
        rhs.push(0.0);
        let mut x = self.lu.solve(&rhs);
        // one step of iterative refinement
        let mut r = self.matrix.matvec(&x);
        for (ri, bi) in r.iter_mut().zip(&rhs) {
            *ri = bi - *ri;
        }
        let corr = self.lu.solve(&r);
        axpy(1.0, &corr, &mut x);
        let rel = relative_residual(&self.matrix, &x, &rhs);
        if !rel.is_finite() {
            return Err(Error::Singular("saddle solve produced non-finite values".into()));
        }
        Ok(SaddleSolution {
            u: x[..self.n_u].to_vec(),
            p: x[self.n_u..self.n_u + self.n_p].to_vec(),
            multiplier: x[self.n_u + self.n_p],
            rel_residual: rel,
        })
    }
}

/// One-shot saddle solve `[A B^T; B 0] (u, p) = (f, g)` with zero-mean `p`.
pub fn solve_saddle(
    a: &CsrMatrix,
    b: &CsrMatrix,
    mean_weights: &[f64],
    fixed: &[usize],
    f: &[f64],
    g: &[f64],
) -> Result<SaddleSolution> {
    SaddleSolver::new(a, b, mean_weights, fixed)?.solve(f, g)
}
