//! Harmonic Ritz pairs of a GMRES cycle and the solver that deflates with
//! them after the first restart.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::krylov::{compare_magnitude, run, ArnoldiData, DeflationSource, GmresConfig, Preconditioner, SolveReport};
use crate::linalg::{dense_eig, dense_lu, DenseMatrix, SparseMatrix};

/// `cond_1(R)` above which the reduction through `R^-1` is abandoned.
const R_COND_LIMIT: f64 = 1e12;
/// Relative distance under which two vectors count as conjugates.
const CONJ_TOL: f64 = 1e-10;

/// Selected harmonic Ritz pairs, realified.
#[derive(Debug, Clone)]
pub struct HarmonicRitzSet {
    /// Every harmonic Ritz value of the cycle, ascending by magnitude.
    pub all_thetas: Vec<Complex64>,
    /// The selected values, ascending by magnitude.
    pub thetas: Vec<Complex64>,
    /// Coefficient vectors of the selected pairs before realification.
    pub y_complex: Vec<Vec<Complex64>>,
    /// Real coefficient block, `steps x d'`.
    pub y: DenseMatrix,
    /// Deflation vectors `z_k = V_m y_k`.
    pub z: Vec<Vec<f64>>,
    /// `||Hbar^T (Hbar y - theta W y)|| / (||Hbar||_F^2 ||y||)` per selected pair,
    /// the projected Petrov-Galerkin residual with `W = V_{m+1}^T V_m`.
    pub pg_residuals: Vec<f64>,
}

/// Indices of the `d` smallest values by magnitude; a conjugate pair straddling
/// position `d` is kept whole.
pub fn select_smallest(values: &[Complex64], d: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_finite()).collect();
    idx.sort_by(|&i, &j| compare_magnitude(&values[i], &values[j]));
    let mut take = d.min(idx.len());
    if take > 0 && take < idx.len() {
        let last = values[idx[take - 1]];
        let next = values[idx[take]];
        if last.im != 0.0 && is_conjugate(last, next) {
            take += 1;
        }
    }
    idx.truncate(take);
    idx
}

fn is_conjugate(a: Complex64, b: Complex64) -> bool {
    (a - b.conj()).norm() <= CONJ_TOL * a.norm().max(f64::MIN_POSITIVE)
}

/// Turns conjugate pairs `(u, conj u)` into `(Re u, -Im u)`; real vectors pass
/// through.
pub fn realify(vectors: &[Vec<Complex64>]) -> Result<Vec<Vec<f64>>> {
    let mut used = vec![false; vectors.len()];
    let mut out = Vec::with_capacity(vectors.len());
    for i in 0..vectors.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let u = &vectors[i];
        let norm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let imag = u.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
        if imag <= CONJ_TOL * norm {
            out.push(u.iter().map(|z| z.re).collect());
            continue;
        }
        let partner = (i + 1..vectors.len()).find(|&j| {
            !used[j]
                && vectors[j].len() == u.len()
                && u.iter().zip(&vectors[j]).map(|(a, b)| (a.conj() - b).norm_sqr()).sum::<f64>().sqrt()
                    <= CONJ_TOL * norm
        });
        let Some(j) = partner else {
            return Err(Error::HarmonicRitzFailure(format!(
                "complex vector {i} has no conjugate partner"
            )));
        };
        used[j] = true;
        out.push(u.iter().map(|z| z.re).collect());
        out.push(u.iter().map(|z| -z.im).collect());
    }
    Ok(out)
}

/// Harmonic Ritz pairs from the eigenproblem
/// `(H_m + h^2 H_m^-T e_m e_m^T) y = theta y`.
pub fn harmonic_ritz_a(data: &ArnoldiData, d: usize) -> Result<HarmonicRitzSet> {
    check_d(data, d)?;
    let m = data.steps;
    let h = data.h_square();
    let lu = dense_lu(&h).map_err(|_| Error::HarmonicRitzFailure("H_m is singular".into()))?;
    let mut em = vec![0.0; m];
    em[m - 1] = 1.0;
    let f = lu.solve_transpose(&em)?;
    let hl = data.h_last();
    let mut mat = h;
    for i in 0..m {
        mat[(i, m - 1)] += hl * hl * f[i];
    }
    let eig = dense_eig(&mat, true)?;
    finish(data, d, eig.values, eig.vectors.unwrap_or_default())
}

/// Harmonic Ritz pairs from `R_m y = theta G y` with `G` the first `m` rows of
/// `Q V_{m+1}^T V_m`, where `Q hbar = [R_m; 0]` through the cycle's Givens
/// rotations.
pub fn harmonic_ritz_b(data: &ArnoldiData, d: usize) -> Result<HarmonicRitzSet> {
    check_d(data, d)?;
    let m = data.steps;
    let r = data.r_factor();
    let mut w = data.basis_gram();
    data.apply_q(&mut w);
    let g = w.submatrix(m, m);

    let (thetas, vectors) = match r_inverse(&r) {
        Some(rinv) if cond_1(&r, &rinv) < R_COND_LIMIT => {
            // R^-1 G y = mu y, theta = 1 / mu
            let c = rinv.matmul(&g)?;
            let eig = dense_eig(&c, true)?;
            let thetas = eig
                .values
                .iter()
                .map(|mu| {
                    if mu.norm() == 0.0 {
                        Complex64::new(f64::INFINITY, 0.0)
                    } else {
                        mu.inv()
                    }
                })
                .collect();
            (thetas, eig.vectors.unwrap_or_default())
        }
        _ => {
            // G^-1 R y = theta y
            let lu = dense_lu(&g)
                .map_err(|_| Error::HarmonicRitzFailure("both R_m and the projected Gram block are singular".into()))?;
            let c = lu.solve_matrix(&r)?;
            let eig = dense_eig(&c, true)?;
            (eig.values, eig.vectors.unwrap_or_default())
        }
    };
    finish(data, d, thetas, vectors)
}

fn check_d(data: &ArnoldiData, d: usize) -> Result<()> {
    if d == 0 || d > data.steps {
        return Err(Error::invalid(format!(
            "need 1 <= d <= m, got d = {d} with m = {}",
            data.steps
        )));
    }
    Ok(())
}

fn r_inverse(r: &DenseMatrix) -> Option<DenseMatrix> {
    let m = r.rows();
    if (0..m).any(|i| r[(i, i)] == 0.0) {
        return None;
    }
    let mut inv = DenseMatrix::zeros(m, m);
    for col in 0..m {
        for i in (0..=col).rev() {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in i + 1..=col {
                s -= r[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = s / r[(i, i)];
        }
    }
    inv.values().iter().all(|v| v.is_finite()).then_some(inv)
}

fn norm_1(m: &DenseMatrix) -> f64 {
    (0..m.cols())
        .map(|j| (0..m.rows()).map(|i| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn cond_1(r: &DenseMatrix, rinv: &DenseMatrix) -> f64 {
    norm_1(r) * norm_1(rinv)
}

fn finish(
    data: &ArnoldiData,
    d: usize,
    thetas: Vec<Complex64>,
    vectors: Vec<Vec<Complex64>>,
) -> Result<HarmonicRitzSet> {
    let m = data.steps;
    let picked = select_smallest(&thetas, d);
    if picked.len() < d {
        return Err(Error::HarmonicRitzFailure(format!(
            "only {} finite harmonic Ritz values for d = {d}",
            picked.len()
        )));
    }
    let mut all_thetas: Vec<Complex64> = thetas.iter().copied().filter(|t| t.is_finite()).collect();
    all_thetas.sort_by(compare_magnitude);

    let y_complex: Vec<Vec<Complex64>> = picked.iter().map(|&i| vectors[i].clone()).collect();
    let sel: Vec<Complex64> = picked.iter().map(|&i| thetas[i]).collect();
    let pg_residuals = sel
        .iter()
        .zip(&y_complex)
        .map(|(t, y)| projected_pg_residual(data, *t, y))
        .collect();
    let real = realify(&y_complex)?;
    let mut y = DenseMatrix::zeros(m, real.len());
    for (k, col) in real.iter().enumerate() {
        for i in 0..m {
            y[(i, k)] = col[i];
        }
    }
    let z = real.iter().map(|col| data.combine(col)).collect();
    Ok(HarmonicRitzSet {
        all_thetas,
        thetas: sel,
        y_complex,
        y,
        z,
        pg_residuals,
    })
}

fn projected_pg_residual(data: &ArnoldiData, theta: Complex64, y: &[Complex64]) -> f64 {
    let m = data.steps;
    let hbar = &data.hbar;
    let w = data.basis_gram();
    // t = Hbar y - theta W y, (m+1)-vector
    let t: Vec<Complex64> = (0..=m)
        .map(|i| {
            (0..m)
                .map(|j| hbar[(i, j)] * y[j] - theta * w[(i, j)] * y[j])
                .sum::<Complex64>()
        })
        .collect();
    let res: f64 = (0..m)
        .map(|j| (0..=m).map(|i| hbar[(i, j)] * t[i]).sum::<Complex64>().norm_sqr())
        .sum::<f64>()
        .sqrt();
    let ynorm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let hn = hbar.frobenius_norm();
    res / (hn * hn * ynorm).max(f64::MIN_POSITIVE)
}

/// GMRES(m) that, at the first restart, deflates with the `d` smallest
/// harmonic Ritz vectors of the finished cycle and keeps that subspace for
/// the rest of the solve.
pub fn rdgmres(
    a: &SparseMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    precond: &Preconditioner,
    cfg: &GmresConfig,
    d: usize,
) -> Result<SolveReport> {
    run(a, b, x0, precond, cfg, DeflationSource::Harmonic { d })
}
