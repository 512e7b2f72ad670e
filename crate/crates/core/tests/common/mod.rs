#![allow(dead_code)]

use defgmres::linalg::{dense_lu, DenseMatrix, SparseMatrix, TripletBuilder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Nonsymmetric sparse matrix with `diag` added on the diagonal.
pub fn random_sparse(rng: &mut ChaCha8Rng, n: usize, per_row: usize, diag: f64) -> SparseMatrix {
    let mut tb = TripletBuilder::new(n);
    for i in 0..n {
        tb.push(i, i, diag + rng.gen_range(0.0..1.0));
        for _ in 0..per_row {
            tb.push(i, rng.gen_range(0..n), rng.gen_range(-1.0..1.0));
        }
    }
    tb.build()
}

pub fn random_dense(rng: &mut ChaCha8Rng, n: usize, diag: f64) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = rng.gen_range(-1.0..1.0) + if i == j { diag } else { 0.0 };
        }
    }
    m
}

/// `S diag(lambda) S^-1` with a random well-conditioned `S`; returns the
/// matrix and `S`.
pub fn similar_to_diag(rng: &mut ChaCha8Rng, lambda: &[f64]) -> (DenseMatrix, DenseMatrix) {
    let n = lambda.len();
    let s = random_dense(rng, n, 3.0);
    let sd = s.matmul(&DenseMatrix::from_diag(lambda)).unwrap();
    let sinv = dense_lu(&s).unwrap().solve_matrix(&DenseMatrix::identity(n)).unwrap();
    (sd.matmul(&sinv).unwrap(), s)
}

pub fn dense_solve(a: &SparseMatrix, b: &[f64]) -> Vec<f64> {
    dense_lu(&a.to_dense()).unwrap().solve(b).unwrap()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b)) / norm(b).max(f64::MIN_POSITIVE)
}

pub fn residual_norm(a: &SparseMatrix, b: &[f64], x: &[f64]) -> f64 {
    norm(&sub(b, &a.spmv(x).unwrap()))
}
