//! Dense spectra of small systems and eigenvector overlap metrics.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::krylov::sort_by_magnitude;
use crate::linalg::{dense_eig, norm2, SparseMatrix};

/// Largest system `spectrum` will densify.
pub const MAX_DENSE_SPECTRUM: usize = 4000;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Ascending by magnitude.
    pub eigenvalues: Vec<Complex64>,
    pub cutoff: f64,
    /// Eigenvalues with `|lambda| <= cutoff`.
    pub n_small: usize,
    /// `|lambda_{n_small+1}| / |lambda_{n_small}|`; `None` when either side is
    /// empty or the smaller magnitude is zero.
    pub gap_ratio: Option<f64>,
}

impl SpectrumReport {
    pub fn from_eigenvalues(mut eigenvalues: Vec<Complex64>, cutoff: f64) -> Self {
        sort_by_magnitude(&mut eigenvalues);
        let n_small = eigenvalues.iter().take_while(|l| l.norm() <= cutoff).count();
        let gap_ratio = (n_small > 0 && n_small < eigenvalues.len())
            .then(|| (eigenvalues[n_small - 1].norm(), eigenvalues[n_small].norm()))
            .filter(|(lo, _)| *lo > 0.0)
            .map(|(lo, hi)| hi / lo);
        SpectrumReport {
            eigenvalues,
            cutoff,
            n_small,
            gap_ratio,
        }
    }

    /// Number of leading eigenvalues separated from the next by a magnitude
    /// ratio of at least `min_ratio`, taking the first such gap.
    pub fn isolated_count(&self, min_ratio: f64) -> usize {
        isolated_count(&self.eigenvalues, min_ratio)
    }

    /// `index,re,im,abs`, one row per eigenvalue.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,re,im,abs\n");
        for (i, l) in self.eigenvalues.iter().enumerate() {
            let _ = writeln!(s, "{i},{:?},{:?},{:?}", l.re, l.im, l.norm());
        }
        s
    }
}

/// Position of the first magnitude gap of at least `min_ratio` in a list
/// sorted by magnitude, or 0 when there is none.
pub fn isolated_count(sorted: &[Complex64], min_ratio: f64) -> usize {
    sorted
        .windows(2)
        .position(|w| {
            let (lo, hi) = (w[0].norm(), w[1].norm());
            if lo == 0.0 {
                hi > 0.0
            } else {
                hi / lo >= min_ratio
            }
        })
        .map_or(0, |p| p + 1)
}

/// Full spectrum through a dense eigensolve.
pub fn spectrum(a: &SparseMatrix, cutoff: f64) -> Result<SpectrumReport> {
    if a.n() > MAX_DENSE_SPECTRUM {
        return Err(Error::SizeLimit {
            n: a.n(),
            limit: MAX_DENSE_SPECTRUM,
        });
    }
    let eig = dense_eig(&a.to_dense(), false)?;
    Ok(SpectrumReport::from_eigenvalues(eig.values, cutoff))
}

/// `|<u, v>| / (||u|| ||v||)`
pub fn subspace_angle(u: &[f64], v: &[f64]) -> Result<f64> {
    crate::error::check_len(u.len(), v.len())?;
    let (nu, nv) = (norm2(u), norm2(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::invalid("overlap of a zero vector"));
    }
    Ok((crate::linalg::dot(u, v).abs() / (nu * nv)).min(1.0))
}

/// Pairs each vector in `a` with a distinct vector in `b`, repeatedly taking
/// the pair of largest remaining overlap. Returns `(i, j, |cos|)` in the
/// order the pairs were chosen.
pub fn greedy_match(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<(usize, usize, f64)>> {
    let mut table = Vec::with_capacity(a.len() * b.len());
    for (i, u) in a.iter().enumerate() {
        for (j, v) in b.iter().enumerate() {
            table.push((i, j, subspace_angle(u, v)?));
        }
    }
    // stable: ties keep the lower (i, j)
    table.sort_by(|x, y| y.2.total_cmp(&x.2));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut out = vec![];
    for (i, j, c) in table {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j, c));
        }
    }
    Ok(out)
}
