use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::linalg::{dense_eig, DenseMatrix};

/// Basis and Hessenberg matrix of one Arnoldi cycle.
///
/// `basis` holds `steps + 1` vectors, or `steps` after a breakdown, in which
/// case the last row of `hbar` is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ArnoldiData {
    pub basis: Vec<Vec<f64>>,
    /// `(steps + 1) x steps`, never rotated.
    pub hbar: DenseMatrix,
    /// Givens rotations `(c, s)` that reduce `hbar` to triangular form.
    pub rotations: Vec<(f64, f64)>,
    pub steps: usize,
}

/// Rotation zeroing `b` in `(a, b)`.
pub(crate) fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

impl ArnoldiData {
    /// Assembles cycle data from a basis and an unrotated Hessenberg matrix,
    /// recomputing the Givens rotations.
    pub fn from_parts(basis: Vec<Vec<f64>>, hbar: DenseMatrix) -> Result<Self> {
        let steps = hbar.cols();
        check_len(steps + 1, hbar.rows())?;
        if steps == 0 {
            return Err(Error::invalid("empty Arnoldi cycle"));
        }
        if basis.len() != steps + 1 && basis.len() != steps {
            return Err(Error::DimensionMismatch {
                expected: steps + 1,
                got: basis.len(),
            });
        }
        let mut r = hbar.clone();
        let mut rotations = Vec::with_capacity(steps);
        for j in 0..steps {
            for (i, &(c, s)) in rotations.iter().enumerate() {
                rotate_rows(&mut r, i, j, c, s);
            }
            let (c, s) = givens(r[(j, j)], r[(j + 1, j)]);
            rotate_rows(&mut r, j, j, c, s);
            rotations.push((c, s));
        }
        Ok(ArnoldiData {
            basis,
            hbar,
            rotations,
            steps,
        })
    }

    pub fn n(&self) -> usize {
        self.basis.first().map_or(0, Vec::len)
    }

    /// Square `H_m`: the first `steps` rows of `hbar`.
    pub fn h_square(&self) -> DenseMatrix {
        self.hbar.submatrix(self.steps, self.steps)
    }

    /// `h_{m+1,m}`
    pub fn h_last(&self) -> f64 {
        self.hbar[(self.steps, self.steps - 1)]
    }

    pub fn broke_down(&self) -> bool {
        self.basis.len() == self.steps
    }

    /// Applies `Q = G_m ... G_1` to the rows of `w` (`(steps+1) x k`).
    pub fn apply_q(&self, w: &mut DenseMatrix) {
        for (i, &(c, s)) in self.rotations.iter().enumerate() {
            for j in 0..w.cols() {
                let a = w[(i, j)];
                let b = w[(i + 1, j)];
                w[(i, j)] = c * a + s * b;
                w[(i + 1, j)] = -s * a + c * b;
            }
        }
    }

    /// Upper-triangular `R_m` with `Q hbar = [R_m; 0]`.
    pub fn r_factor(&self) -> DenseMatrix {
        let mut r = self.hbar.clone();
        self.apply_q(&mut r);
        let mut out = r.submatrix(self.steps, self.steps);
        for i in 0..self.steps {
            for j in 0..i {
                out[(i, j)] = 0.0;
            }
        }
        out
    }

    /// `V_{m+1}^T V_m` from the stored vectors; a missing last vector counts as
    /// zero.
    pub fn basis_gram(&self) -> DenseMatrix {
        let m = self.steps;
        let mut w = DenseMatrix::zeros(m + 1, m);
        for i in 0..self.basis.len().min(m + 1) {
            for j in 0..m {
                w[(i, j)] = crate::linalg::dot(&self.basis[i], &self.basis[j]);
            }
        }
        w
    }

    /// `V_m y`
    pub fn combine(&self, y: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.n()];
        for (v, &c) in self.basis.iter().zip(y) {
            crate::linalg::axpy(c, v, &mut z);
        }
        z
    }
}

pub(crate) fn rotate_rows(r: &mut DenseMatrix, i: usize, j: usize, c: f64, s: f64) {
    let a = r[(i, j)];
    let b = r[(i + 1, j)];
    r[(i, j)] = c * a + s * b;
    r[(i + 1, j)] = -s * a + c * b;
}

/// Sorts by magnitude, then real part, then imaginary part with `Im >= 0`
/// first.
pub fn sort_by_magnitude(values: &mut [Complex64]) {
    values.sort_by(|a, b| compare_magnitude(a, b));
}

pub(crate) fn compare_magnitude(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.norm()
        .total_cmp(&b.norm())
        .then(a.re.total_cmp(&b.re))
        .then((a.im < 0.0).cmp(&(b.im < 0.0)))
        .then(a.im.abs().total_cmp(&b.im.abs()))
}

/// Eigenvalues of the square Hessenberg block, ascending by magnitude.
pub fn ritz_values(data: &ArnoldiData) -> Result<Vec<Complex64>> {
    hessenberg_ritz(&data.hbar, data.steps)
}

pub(crate) fn hessenberg_ritz(hbar: &DenseMatrix, k: usize) -> Result<Vec<Complex64>> {
    if k == 0 {
        return Err(Error::invalid("Ritz values need at least one Arnoldi step"));
    }
    let mut vals = dense_eig(&hbar.submatrix(k, k), false)?.values;
    sort_by_magnitude(&mut vals);
    Ok(vals)
}
