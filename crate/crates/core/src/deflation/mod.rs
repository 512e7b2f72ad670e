//! Deflation subspaces and the projectors built on them.
//!
//! With `E = Z^T Ap Z` the context applies `P1 = I - Ap Z E^-1 Z^T` and
//! `P2 = I - Z E^-1 Z^T Ap` matrix-free, where `Ap` is either `A` or `A M^-1`.

use std::hash::{DefaultHasher, Hash, Hasher};

use crate::error::{check_len, Error, Result};
use crate::krylov::Preconditioner;
use crate::linalg::{dense_lu_with_threshold, DenseMatrix, LuFactors, SparseMatrix};

/// Relative pivot threshold used when factorizing `E`.
pub const COARSE_PIVOT_TOL: f64 = 1e-12;

/// One column of `Z`, kept sparse when at most half of it is nonzero.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisColumn {
    Dense(Vec<f64>),
    Sparse { idx: Vec<usize>, val: Vec<f64> },
}

impl BasisColumn {
    /// Stores `v` sparsely when that halves the storage, dropping exact zeros.
    pub fn compress(v: Vec<f64>) -> Self {
        let nnz = v.iter().filter(|x| **x != 0.0).count();
        if 2 * nnz <= v.len() {
            let (idx, val) = v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, x)| (i, *x)).unzip();
            BasisColumn::Sparse { idx, val }
        } else {
            BasisColumn::Dense(v)
        }
    }

    pub fn indicator(mut idx: Vec<usize>) -> Self {
        idx.sort_unstable();
        let val = vec![1.0; idx.len()];
        BasisColumn::Sparse { idx, val }
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        match self {
            BasisColumn::Dense(z) => z.iter().zip(v).map(|(a, b)| a * b).sum(),
            BasisColumn::Sparse { idx, val } => idx.iter().zip(val).map(|(&i, a)| a * v[i]).sum(),
        }
    }

    /// y += alpha * column
    pub fn axpy(&self, alpha: f64, y: &mut [f64]) {
        match self {
            BasisColumn::Dense(z) => {
                for (yi, zi) in y.iter_mut().zip(z) {
                    *yi += alpha * zi;
                }
            }
            BasisColumn::Sparse { idx, val } => {
                for (&i, a) in idx.iter().zip(val) {
                    y[i] += alpha * a;
                }
            }
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        match self {
            BasisColumn::Dense(z) => z.clone(),
            BasisColumn::Sparse { idx, val } => {
                let mut z = vec![0.0; n];
                for (&i, &a) in idx.iter().zip(val) {
                    z[i] = a;
                }
                z
            }
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            BasisColumn::Dense(z) => z.len(),
            BasisColumn::Sparse { idx, .. } => idx.len(),
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        match self {
            BasisColumn::Dense(z) => check_len(n, z.len()),
            BasisColumn::Sparse { idx, val } => {
                check_len(idx.len(), val.len())?;
                if idx.iter().any(|&i| i >= n) || idx.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid("sparse column indices must be increasing and < n"));
                }
                Ok(())
            }
        }
    }

    fn hash_bits<H: Hasher>(&self, h: &mut H) {
        match self {
            BasisColumn::Dense(z) => z.iter().for_each(|v| v.to_bits().hash(h)),
            BasisColumn::Sparse { idx, val } => {
                idx.hash(h);
                val.iter().for_each(|v| v.to_bits().hash(h));
            }
        }
    }
}

/// The `n x d` deflation matrix `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflationBasis {
    n: usize,
    columns: Vec<BasisColumn>,
}

impl DeflationBasis {
    /// Requires `1 <= d <= n`. Linear independence is checked later, when `E`
    /// is factorized.
    pub fn new(n: usize, columns: Vec<BasisColumn>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::invalid("deflation basis needs at least one column"));
        }
        if columns.len() > n {
            return Err(Error::invalid(format!(
                "{} deflation vectors exceed the dimension {n}",
                columns.len()
            )));
        }
        for c in &columns {
            c.check(n)?;
        }
        Ok(DeflationBasis { n, columns })
    }

    pub fn from_dense_columns(n: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(n, columns.into_iter().map(BasisColumn::Dense).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[BasisColumn] {
        &self.columns
    }

    pub fn column_dense(&self, j: usize) -> Vec<f64> {
        self.columns[j].to_dense(self.n)
    }

    /// `Z^T v`
    pub fn transpose_apply(&self, v: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|c| c.dot(v)).collect()
    }

    /// `Z c`
    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (col, &a) in self.columns.iter().zip(c) {
            col.axpy(a, &mut out);
        }
        out
    }
}

/// Which operator the projectors are built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApChoice {
    /// `Ap = A`; cheap, and the default with right preconditioning.
    #[default]
    A,
    /// `Ap = A M^-1`.
    AMinv,
}

/// Factorized coarse system and cached products for one `(A, M, Z, b)`.
#[derive(Debug, Clone)]
pub struct DeflationContext<'a> {
    a: &'a SparseMatrix,
    precond: &'a Preconditioner,
    basis: Option<DeflationBasis>,
    az: Vec<BasisColumn>,
    e: DenseMatrix,
    e_lu: Option<LuFactors>,
    x_star: Vec<f64>,
    ap: ApChoice,
}

/// Builds `E`, factorizes it and computes the coarse solution `Z E^-1 Z^T b`.
pub fn build_context<'a>(
    a: &'a SparseMatrix,
    precond: &'a Preconditioner,
    basis: DeflationBasis,
    b: &[f64],
    ap: ApChoice,
) -> Result<DeflationContext<'a>> {
    let n = a.n();
    check_len(n, basis.n())?;
    check_len(n, b.len())?;
    check_len(n, precond.dim().unwrap_or(n))?;
    let d = basis.d();
    let mut az = Vec::with_capacity(d);
    let mut tmp = vec![0.0; n];
    for col in basis.columns() {
        let mut z = col.to_dense(n);
        if ap == ApChoice::AMinv {
            precond.apply_in_place(&mut z);
        }
        a.spmv_into(&z, &mut tmp);
        az.push(BasisColumn::compress(tmp.clone()));
    }
    let mut e = DenseMatrix::zeros(d, d);
    for (j, azj) in az.iter().enumerate() {
        let azj = azj.to_dense(n);
        for (i, zi) in basis.columns().iter().enumerate() {
            e[(i, j)] = zi.dot(&azj);
        }
    }
    let threshold = COARSE_PIVOT_TOL * e.frobenius_norm();
    let e_lu = dense_lu_with_threshold(&e, threshold)?;
    let mut ctx = DeflationContext {
        a,
        precond,
        basis: Some(basis),
        az,
        e,
        e_lu: Some(e_lu),
        x_star: vec![],
        ap,
    };
    ctx.x_star = ctx.coarse_correction(b);
    Ok(ctx)
}

impl<'a> DeflationContext<'a> {
    /// The `d = 0` context: both projectors are the identity and `x* = 0`.
    pub fn identity(a: &'a SparseMatrix, precond: &'a Preconditioner) -> Self {
        DeflationContext {
            a,
            precond,
            basis: None,
            az: vec![],
            e: DenseMatrix::zeros(0, 0),
            e_lu: None,
            x_star: vec![0.0; a.n()],
            ap: ApChoice::A,
        }
    }

    pub fn d(&self) -> usize {
        self.az.len()
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn basis(&self) -> Option<&DeflationBasis> {
        self.basis.as_ref()
    }

    pub fn coarse_matrix(&self) -> &DenseMatrix {
        &self.e
    }

    pub fn az(&self) -> &[BasisColumn] {
        &self.az
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    pub fn ap_choice(&self) -> ApChoice {
        self.ap
    }

    pub fn matrix(&self) -> &'a SparseMatrix {
        self.a
    }

    pub fn preconditioner(&self) -> &'a Preconditioner {
        self.precond
    }

    /// Same projectors, coarse solution recomputed for a new right-hand side.
    pub fn with_rhs(&self, b: &[f64]) -> Result<Self> {
        check_len(self.n(), b.len())?;
        let mut ctx = self.clone();
        ctx.x_star = ctx.coarse_correction(b);
        Ok(ctx)
    }

    /// `Z E^-1 Z^T v`
    fn coarse_correction(&self, v: &[f64]) -> Vec<f64> {
        match &self.basis {
            None => vec![0.0; self.n()],
            Some(basis) => {
                let c = self.coarse_solve(&basis.transpose_apply(v));
                basis.apply(&c)
            }
        }
    }

    fn coarse_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; rhs.len()];
        if let Some(lu) = &self.e_lu {
            lu.solve_into(rhs, &mut c);
        }
        c
    }

    /// `Ap v`
    pub fn apply_ap(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        match self.ap {
            ApChoice::A => self.a.spmv_into(v, &mut out),
            ApChoice::AMinv => {
                let mut t = v.to_vec();
                self.precond.apply_in_place(&mut t);
                self.a.spmv_into(&t, &mut out);
            }
        }
        out
    }

    pub fn apply_p1(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), v.len())?;
        let mut out = v.to_vec();
        self.apply_p1_in_place(&mut out);
        Ok(out)
    }

    /// `v <- v - AZ E^-1 Z^T v`
    pub fn apply_p1_in_place(&self, v: &mut [f64]) {
        let Some(basis) = &self.basis else { return };
        let lu = self.e_lu.as_ref().expect("factorized coarse matrix");
        let d = self.d();
        const STACK: usize = 64;
        let mut rhs_buf = [0.0; STACK];
        let mut c_buf = [0.0; STACK];
        let mut rhs_heap;
        let mut c_heap;
        let (rhs, c): (&mut [f64], &mut [f64]) = if d <= STACK {
            (&mut rhs_buf[..d], &mut c_buf[..d])
        } else {
            rhs_heap = vec![0.0; d];
            c_heap = vec![0.0; d];
            (&mut rhs_heap[..], &mut c_heap[..])
        };
        for (r, col) in rhs.iter_mut().zip(basis.columns()) {
            *r = col.dot(v);
        }
        lu.solve_into(rhs, c);
        for (col, &cj) in self.az.iter().zip(c.iter()) {
            col.axpy(-cj, v);
        }
    }

    pub fn apply_p2(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), v.len())?;
        let corr = self.coarse_correction(&self.apply_ap(v));
        Ok(v.iter().zip(&corr).map(|(a, b)| a - b).collect())
    }

    /// Recovers the solution of `A x = b` from an iterate `x_hat` of the
    /// deflated system, `x = x* + P2 x_hat`. With `Ap = A M^-1` the projection
    /// acts on `u = M x`, so `x = M^-1 (x* + P2 M x_hat)`.
    pub fn reconstruct(&self, x_hat: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), x_hat.len())?;
        match self.ap {
            ApChoice::A => {
                let p2 = self.apply_p2(x_hat)?;
                Ok(self.x_star.iter().zip(&p2).map(|(a, b)| a + b).collect())
            }
            ApChoice::AMinv => {
                let u = self.precond.apply_forward(x_hat);
                let p2 = self.apply_p2(&u)?;
                let mut x: Vec<f64> = self.x_star.iter().zip(&p2).map(|(a, b)| a + b).collect();
                self.precond.apply_in_place(&mut x);
                Ok(x)
            }
        }
    }

    /// Hash over the bit patterns of `Z`, `AZ`, `E` and `x*`.
    pub fn digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        if let Some(b) = &self.basis {
            b.columns().iter().for_each(|c| c.hash_bits(&mut h));
        }
        self.az.iter().for_each(|c| c.hash_bits(&mut h));
        self.e.values().iter().for_each(|v| v.to_bits().hash(&mut h));
        self.x_star.iter().for_each(|v| v.to_bits().hash(&mut h));
        h.finish()
    }
}
