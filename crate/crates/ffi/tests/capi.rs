use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use defgmres_ffi::*;

/// Tridiagonal `[-1, 2.5, -1]` of order `n` in CSR.
fn tridiag(n: usize) -> *mut DgMatrix {
    let (mut offs, mut cols, mut vals) = (vec![0], vec![], vec![]);
    for i in 0..n {
        if i > 0 {
            cols.push(i - 1);
            vals.push(-1.0);
        }
        cols.push(i);
        vals.push(2.5);
        if i + 1 < n {
            cols.push(i + 1);
            vals.push(-1.0);
        }
        offs.push(cols.len());
    }
    let mut m = ptr::null_mut();
    let s = unsafe { dg_matrix_from_csr(n, cols.len(), offs.as_ptr(), cols.as_ptr(), vals.as_ptr(), &mut m) };
    assert_eq!(s, DgStatus::Ok);
    m
}

fn last_error() -> String {
    let p = dg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn solution(r: *const DgReport) -> Vec<f64> {
    let n = unsafe { dg_report_n(r) };
    let mut x = vec![0.0; n];
    assert_eq!(unsafe { dg_report_solution(r, x.as_mut_ptr(), n) }, DgStatus::Ok);
    x
}

#[test]
fn gmres_round_trip() {
    let n = 40;
    let a = tridiag(n);
    assert_eq!(unsafe { dg_matrix_n(a) }, n);
    assert_eq!(unsafe { dg_matrix_nnz(a) }, 3 * n - 2);
    let b = vec![1.0; n];
    let mut opts = dg_solver_options_default();
    opts.tol = 1e-10;
    let mut r = ptr::null_mut();
    let s = unsafe { dg_gmres(a, b.as_ptr(), n, &opts, &mut r) };
    assert_eq!(s, DgStatus::Ok);
    unsafe {
        assert!(dg_report_converged(r));
        assert!(dg_report_final_relres(r) <= 1e-10);
        assert_eq!(dg_report_deflation_dim(r), 0);
        let len = dg_report_history_len(r);
        assert_eq!(len, dg_report_iterations(r) + 1);
        let mut h = vec![0.0; len];
        assert_eq!(dg_report_history(r, h.as_mut_ptr(), len), DgStatus::Ok);
        assert_eq!(h[0], 1.0);
        assert!(h[len - 1] <= 1e-10);
    }
    // A x = b row by row
    let x = solution(r);
    for i in 0..n {
        let left = if i > 0 { x[i - 1] } else { 0.0 };
        let right = if i + 1 < n { x[i + 1] } else { 0.0 };
        assert!((2.5 * x[i] - left - right - 1.0).abs() < 1e-8);
    }
    unsafe {
        dg_report_free(r);
        dg_matrix_free(a);
    }
}

#[test]
fn deflated_solvers_agree_with_plain_gmres() {
    let n = 30;
    let a = tridiag(n);
    let b: Vec<f64> = (0..n).map(|i| (i % 4) as f64).collect();
    let mut opts = dg_solver_options_default();
    opts.restart = 10;
    opts.tol = 1e-10;
    opts.precond = DgPrecond::Identity;

    let labels: Vec<usize> = (0..n).map(|i| i / 10).collect();
    let mut basis = ptr::null_mut();
    assert_eq!(unsafe { dg_basis_from_labels(n, labels.as_ptr(), &mut basis) }, DgStatus::Ok);
    assert_eq!(unsafe { dg_basis_d(basis) }, 3);

    let (mut plain, mut pd, mut rd) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(dg_gmres(a, b.as_ptr(), n, &opts, &mut plain), DgStatus::Ok);
        assert_eq!(dg_pdgmres(a, b.as_ptr(), n, &opts, basis, &mut pd), DgStatus::Ok);
        assert_eq!(dg_rdgmres(a, b.as_ptr(), n, &opts, 2, &mut rd), DgStatus::Ok);
        assert_eq!(dg_report_deflation_dim(pd), 3);
    }
    let x = solution(plain);
    for other in [solution(pd), solution(rd)] {
        let diff: f64 = x.iter().zip(&other).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-7, "{diff}");
    }
    unsafe {
        dg_report_free(plain);
        dg_report_free(pd);
        dg_report_free(rd);
        dg_basis_free(basis);
        dg_matrix_free(a);
    }
}

#[test]
fn dense_basis_columns() {
    let n = 4;
    let cols = [1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0];
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { dg_basis_from_columns(n, 2, cols.as_ptr(), &mut b) }, DgStatus::Ok);
    assert_eq!(unsafe { dg_basis_d(b) }, 2);
    unsafe { dg_basis_free(b) };

    let s = unsafe { dg_basis_from_columns(n, 1, ptr::null(), &mut b) };
    assert_eq!(s, DgStatus::NullPointer);
    assert!(b.is_null());
    let s = unsafe { dg_basis_from_columns(usize::MAX, 2, cols.as_ptr(), &mut b) };
    assert_eq!(s, DgStatus::InvalidArgument);
}

#[test]
fn errors_are_reported() {
    let mut m = ptr::null_mut();
    // row offsets that do not end at nnz
    let offs = [0usize, 1, 3];
    let cols = [0usize, 1];
    let vals = [1.0, 1.0];
    let s = unsafe { dg_matrix_from_csr(2, 2, offs.as_ptr(), cols.as_ptr(), vals.as_ptr(), &mut m) };
    assert_ne!(s, DgStatus::Ok);
    assert!(m.is_null());
    assert!(!last_error().is_empty());

    let s = unsafe { dg_matrix_from_csr(2, 2, ptr::null(), cols.as_ptr(), vals.as_ptr(), &mut m) };
    assert_eq!(s, DgStatus::NullPointer);
    assert!(last_error().contains("row_offsets"));

    let a = tridiag(5);
    let b = [1.0; 4];
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { dg_gmres(a, b.as_ptr(), 4, ptr::null(), &mut r) }, DgStatus::DimensionMismatch);
    assert!(r.is_null());
    assert_eq!(unsafe { dg_gmres(ptr::null(), b.as_ptr(), 4, ptr::null(), &mut r) }, DgStatus::NullPointer);
    let b5 = [1.0; 5];
    assert_eq!(unsafe { dg_gmres(a, b5.as_ptr(), 5, ptr::null(), ptr::null_mut()) }, DgStatus::NullPointer);
    assert_eq!(
        unsafe { dg_pdgmres(a, b5.as_ptr(), 5, ptr::null(), ptr::null(), &mut r) },
        DgStatus::NullPointer
    );

    // d larger than the restart length
    let mut opts = dg_solver_options_default();
    opts.restart = 2;
    assert_eq!(unsafe { dg_rdgmres(a, b5.as_ptr(), 5, &opts, 3, &mut r) }, DgStatus::InvalidArgument);

    // duplicated basis column
    let mut basis = ptr::null_mut();
    let cols = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
    assert_eq!(unsafe { dg_basis_from_columns(5, 2, cols.as_ptr(), &mut basis) }, DgStatus::Ok);
    assert_eq!(
        unsafe { dg_pdgmres(a, b5.as_ptr(), 5, ptr::null(), basis, &mut r) },
        DgStatus::SingularCoarseMatrix
    );
    assert!(last_error().contains("singular"));

    let mut short = [0.0; 2];
    unsafe {
        assert_eq!(dg_gmres(a, b5.as_ptr(), 5, ptr::null(), &mut r), DgStatus::Ok);
        assert_eq!(dg_report_solution(r, short.as_mut_ptr(), 2), DgStatus::DimensionMismatch);
        dg_report_free(r);
        dg_basis_free(basis);
        dg_matrix_free(a);
        // null handles are accepted by accessors and free functions
        dg_matrix_free(ptr::null_mut());
        assert_eq!(dg_report_iterations(ptr::null()), 0);
        assert!(dg_report_final_relres(ptr::null()).is_nan());
    }
}

#[test]
fn not_converged_still_returns_a_report() {
    let n = 50;
    let a = tridiag(n);
    let b = vec![1.0; n];
    let mut opts = dg_solver_options_default();
    opts.restart = 3;
    opts.max_iters = 3;
    opts.tol = 1e-12;
    opts.precond = DgPrecond::Identity;
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { dg_gmres(a, b.as_ptr(), n, &opts, &mut r) }, DgStatus::NotConverged);
    assert!(!r.is_null());
    unsafe {
        assert!(!dg_report_converged(r));
        assert_eq!(dg_report_iterations(r), 3);
        dg_report_free(r);
        dg_matrix_free(a);
    }
    assert!(last_error().contains("not converged"));
}

#[test]
fn problem_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.cfg");
    std::fs::write(&cfg, "problem = sandwich\nsigma = 1e6\n").unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { dg_problem_from_config(path.as_ptr(), &mut p) }, DgStatus::Ok);
    let n = unsafe { dg_problem_n(p) };
    assert_eq!(n, 147);
    let mut rhs = vec![0.0; n];
    assert_eq!(unsafe { dg_problem_rhs(p, rhs.as_mut_ptr(), n) }, DgStatus::Ok);
    let a = unsafe { dg_problem_matrix(p) };
    assert_eq!(unsafe { dg_matrix_n(a) }, n);

    let labels: Vec<usize> = (0..n).map(|i| i / 49).collect();
    let mut basis = ptr::null_mut();
    assert_eq!(unsafe { dg_basis_from_labels(n, labels.as_ptr(), &mut basis) }, DgStatus::Ok);
    let mut opts = dg_solver_options_default();
    opts.restart = 20;
    opts.max_iters = 300;
    opts.precond = DgPrecond::Identity;
    let (mut pd, mut g) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(dg_pdgmres(a, rhs.as_ptr(), n, &opts, basis, &mut pd), DgStatus::Ok);
        assert_eq!(dg_gmres(a, rhs.as_ptr(), n, &opts, &mut g), DgStatus::NotConverged);
        assert!(dg_report_iterations(pd) < dg_report_iterations(g));
        dg_report_free(pd);
        dg_report_free(g);
        dg_basis_free(basis);
        dg_problem_free(p);
    }

    std::fs::write(&cfg, "problem = sandwich\nbogus = 1\n").unwrap();
    assert_eq!(unsafe { dg_problem_from_config(path.as_ptr(), &mut p) }, DgStatus::Config);
    assert!(last_error().starts_with("config line 2"));
    let missing = CString::new(dir.path().join("none.cfg").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { dg_problem_from_config(missing.as_ptr(), &mut p) }, DgStatus::Io);
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/defgmres.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["dg_gmres", "dg_rdgmres", "dg_pdgmres", "dg_last_error_message", "DG_STATUS_NOT_CONVERGED"] {
        assert!(text.contains(name), "{name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{header}\"\nint main(void) {{ DgSolverOptions o = dg_solver_options_default(); \
             DgMatrix *m = NULL; DgStatus s = dg_matrix_from_csr(0, 0, NULL, NULL, NULL, &m); \
             return (int)s + (int)o.restart; }}\n"
        ),
    )
    .unwrap();
    let Ok(out) = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).output() else {
        eprintln!("no C compiler available, skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
