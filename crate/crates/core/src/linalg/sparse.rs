use crate::error::{check_len, Error, Result};
use crate::linalg::DenseMatrix;

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, checking every structural invariant.
    pub fn new(
        n: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_len(n + 1, row_offsets.len())?;
        check_len(col_indices.len(), values.len())?;
        if row_offsets[0] != 0 || row_offsets[n] != values.len() {
            return Err(Error::invalid("row offsets must start at 0 and end at nnz"));
        }
        for i in 0..n {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(Error::invalid(format!("row offsets decrease at row {i}")));
            }
            let cols = &col_indices[lo..hi];
            if cols.iter().any(|&c| c >= n) {
                return Err(Error::invalid(format!("column index out of range in row {i}")));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!(
                    "column indices not strictly increasing in row {i}"
                )));
            }
        }
        Ok(SparseMatrix {
            n,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Converts a square dense matrix, dropping exact zeros.
    pub fn from_dense(m: &DenseMatrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::invalid("sparse matrices must be square"));
        }
        let mut b = TripletBuilder::new(m.rows());
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if m[(i, j)] != 0.0 {
                    b.push(i, j, m[(i, j)]);
                }
            }
        }
        Ok(b.build())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        let mut y = vec![0.0; self.n];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without allocation. Panics on length mismatch.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n, "spmv input length");
        assert_eq!(y.len(), self.n, "spmv output length");
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = self.row_offsets[i];
            let hi = self.row_offsets[i + 1];
            let mut s = 0.0;
            for p in lo..hi {
                s += self.values[p] * x[self.col_indices[p]];
            }
            *yi = s;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (0..self.n).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .all(|(&j, &v)| (v - self.get(j, i)).abs() <= rel_tol * scale)
        })
    }

    /// Returns `diag(s) * A`.
    pub fn scale_rows(&self, s: &[f64]) -> Result<Self> {
        check_len(self.n, s.len())?;
        let mut values = self.values.clone();
        for i in 0..self.n {
            for v in &mut values[self.row_offsets[i]..self.row_offsets[i + 1]] {
                *v *= s[i];
            }
        }
        Ok(SparseMatrix {
            values,
            ..self.clone()
        })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }
}

/// Accumulates `(row, col, value)` entries; duplicates are summed.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        TripletBuilder {
            n,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.n && j < self.n, "triplet index out of range");
        self.entries.push((i, j, v));
    }

    pub fn build(mut self) -> SparseMatrix {
        // Stable sort keeps the summation order of duplicates deterministic.
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_offsets = vec![0usize; self.n + 1];
        let mut col_indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(j);
                values.push(v);
                row_offsets[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n {
            row_offsets[i + 1] += row_offsets[i];
        }
        SparseMatrix {
            n: self.n,
            row_offsets,
            col_indices,
            values,
        }
    }
}
