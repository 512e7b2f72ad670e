use crate::error::{check_len, Error, Result};
use crate::linalg::SparseMatrix;

/// Right preconditioner `M`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Preconditioner {
    #[default]
    Identity,
    /// `M = diag(A)`.
    Jacobi { diag: Vec<f64> },
}

impl Preconditioner {
    pub fn jacobi(a: &SparseMatrix) -> Result<Self> {
        let diag = a.diagonal();
        if let Some(i) = diag.iter().position(|d| *d == 0.0 || !d.is_finite()) {
            return Err(Error::invalid(format!("Jacobi needs a nonzero diagonal (row {i})")));
        }
        Ok(Preconditioner::Jacobi { diag })
    }

    /// Dimension the preconditioner was built for, if it has one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Preconditioner::Identity => None,
            Preconditioner::Jacobi { diag } => Some(diag.len()),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Preconditioner::Identity)
    }

    /// `M^-1 v`
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if let Some(n) = self.dim() {
            check_len(n, v.len())?;
        }
        let mut out = v.to_vec();
        self.apply_in_place(&mut out);
        Ok(out)
    }

    pub fn apply_in_place(&self, v: &mut [f64]) {
        if let Preconditioner::Jacobi { diag } = self {
            for (x, d) in v.iter_mut().zip(diag) {
                *x /= d;
            }
        }
    }

    /// `M v`
    pub fn apply_forward(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Preconditioner::Identity => v.to_vec(),
            Preconditioner::Jacobi { diag } => v.iter().zip(diag).map(|(x, d)| x * d).collect(),
        }
    }
}
