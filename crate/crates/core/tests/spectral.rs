mod common;

use common::*;
use defgmres::linalg::{DenseMatrix, SparseMatrix};
use defgmres::spectral::*;
use defgmres::testbed::cases::{alternating_problem, sandwich_problem};
use defgmres::Error;
use num_complex::Complex64 as C;

#[test]
fn identity_spectrum() {
    let s = spectrum(&SparseMatrix::identity(5), 0.5).unwrap();
    assert_eq!(s.n_small, 0);
    assert_eq!(s.gap_ratio, None);
    assert!(s.eigenvalues.iter().all(|l| *l == C::new(1.0, 0.0)));
}

#[test]
fn diagonal_spectrum_is_exact() {
    let d = [3.0, -1e-4, 0.5, 2e-6, 7.0];
    let a = SparseMatrix::from_dense(&DenseMatrix::from_diag(&d)).unwrap();
    let s = spectrum(&a, 1e-3).unwrap();
    let want = [2e-6, -1e-4, 0.5, 3.0, 7.0];
    for (l, w) in s.eigenvalues.iter().zip(want) {
        assert!((l.re - w).abs() <= 1e-12 * w.abs().max(1.0));
        assert_eq!(l.im, 0.0);
    }
    assert_eq!(s.n_small, 2);
    assert!((s.gap_ratio.unwrap() - 5000.0).abs() < 1e-6);
}

#[test]
fn random_similarity_recovers_the_spectrum() {
    let mut g = rng(12);
    let lambda = [0.001, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let (a, _) = similar_to_diag(&mut g, &lambda);
    let s = spectrum(&SparseMatrix::from_dense(&a).unwrap(), 0.01).unwrap();
    assert_eq!(s.n_small, 1);
    for (l, w) in s.eigenvalues.iter().zip(lambda) {
        assert!((l - C::new(w, 0.0)).norm() <= 1e-9 * w.max(1.0));
    }
}

#[test]
fn alternating_stacks_have_one_small_eigenvalue_per_enclosed_layer() {
    for eps in [1e-4, 1e-5, 1e-6, 1e-7] {
        for layers in 1..=3 {
            let p = alternating_problem(layers, eps).unwrap();
            let s = spectrum(&p.matrix, 100.0 * eps).unwrap();
            assert_eq!(s.n_small, layers, "eps {eps}, L {layers}");
            assert!(s.eigenvalues[layers].norm() >= 0.01, "eps {eps}, L {layers}");
        }
    }
}

#[test]
fn sandwich_spectrum_has_a_separated_small_end() {
    let p = sandwich_problem(1e6).unwrap();
    let s = spectrum(&p.matrix, 1e-3).unwrap();
    assert_eq!(s.eigenvalues.len(), 147);
    assert!(s.n_small >= 1);
    assert!(s.gap_ratio.unwrap() >= 100.0);
    assert_eq!(s.isolated_count(100.0), s.n_small);
}

#[test]
fn isolated_count_takes_the_first_gap() {
    let v: Vec<C> = [1e-8, 2e-8, 1e-3, 1.0, 2.0].iter().map(|&x| C::new(x, 0.0)).collect();
    assert_eq!(isolated_count(&v, 100.0), 2);
    assert_eq!(isolated_count(&v, 1e6), 0);
    let z: Vec<C> = [0.0, 1.0].iter().map(|&x| C::new(x, 0.0)).collect();
    assert_eq!(isolated_count(&z, 100.0), 1);
}

#[test]
fn size_cap() {
    let big = SparseMatrix::identity(MAX_DENSE_SPECTRUM + 1);
    assert!(matches!(spectrum(&big, 1.0), Err(Error::SizeLimit { .. })));
}

#[test]
fn overlaps() {
    assert!((subspace_angle(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() <= 1e-15);
    assert_eq!(subspace_angle(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    assert_eq!(subspace_angle(&[1.0, 0.0], &[-3.0, 0.0]).unwrap(), 1.0);
    let c = subspace_angle(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
    assert!((c - 0.5f64.sqrt()).abs() < 1e-15);
    assert!(subspace_angle(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    assert!(subspace_angle(&[1.0], &[1.0, 0.0]).is_err());
}

#[test]
fn greedy_matching_pairs_best_overlaps_first() {
    let a = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.2]];
    let b = vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.1, 0.0], vec![0.0, 0.0, 1.0]];
    let m = greedy_match(&a, &b).unwrap();
    assert_eq!(m.len(), 2);
    assert_eq!((m[0].0, m[0].1), (0, 1));
    assert_eq!((m[1].0, m[1].1), (1, 0));
    assert!(m[0].2 >= m[1].2);
}

#[test]
fn csv_rows() {
    let s = SpectrumReport::from_eigenvalues(vec![C::new(2.0, 0.0), C::new(0.0, -1.0)], 0.5);
    assert_eq!(s.to_csv(), "index,re,im,abs\n0,0.0,-1.0,1.0\n1,2.0,0.0,2.0\n");
}
