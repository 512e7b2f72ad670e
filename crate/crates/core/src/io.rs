//! Text formats: Matrix Market coordinate files, plain vectors and the CSV
//! schemas written by the command-line driver.
//!
//! Floats are printed with Rust's shortest round-trip formatting, so equal
//! values always produce equal bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::krylov::SolveReport;
use crate::linalg::{SparseMatrix, TripletBuilder};

const MM_HEADER: &str = "%%MatrixMarket matrix coordinate real general";

/// Writes `text`, creating missing parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn matrix_market_string(a: &SparseMatrix) -> String {
    let mut s = String::with_capacity(a.nnz() * 32 + 64);
    let _ = writeln!(s, "{MM_HEADER}");
    let _ = writeln!(s, "{} {} {}", a.n(), a.n(), a.nnz());
    for i in 0..a.n() {
        let (cols, vals) = a.row(i);
        for (j, v) in cols.iter().zip(vals) {
            let _ = writeln!(s, "{} {} {v:?}", i + 1, j + 1);
        }
    }
    s
}

pub fn write_matrix_market(path: &Path, a: &SparseMatrix) -> Result<()> {
    write_text(path, &matrix_market_string(a))
}

/// Reads a square real `coordinate general` matrix; duplicates are summed.
pub fn read_matrix_market(path: &Path) -> Result<SparseMatrix> {
    let text = read_text(path)?;
    parse_matrix_market(&text).map_err(|e| relocate(e, path))
}

fn relocate(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { line, msg, .. } => Error::format_at(path, line, msg),
        other => other,
    }
}

fn fmt_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        path: None,
        line: Some(line),
        msg: msg.into(),
    }
}

pub fn parse_matrix_market(text: &str) -> Result<SparseMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| fmt_err(1, "empty file"))?;
    let h: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if h.len() < 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" || h[2] != "coordinate" {
        return Err(fmt_err(1, "expected a Matrix Market coordinate header"));
    }
    if h[3] != "real" || h[4] != "general" {
        return Err(fmt_err(1, format!("unsupported field/symmetry {} {}", h[3], h[4])));
    }
    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (no, size) = body.next().ok_or_else(|| fmt_err(2, "missing size line"))?;
    let dims = parse_usizes(size, no + 1)?;
    if dims.len() != 3 {
        return Err(fmt_err(no + 1, "size line needs `rows cols nnz`"));
    }
    let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
    if rows != cols {
        return Err(fmt_err(no + 1, format!("matrix is {rows}x{cols}, not square")));
    }
    let mut tb = TripletBuilder::new(rows);
    let mut count = 0;
    for (no, line) in body {
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 3 {
            return Err(fmt_err(no + 1, "entry needs `i j value`"));
        }
        let i: usize = tok[0].parse().map_err(|_| fmt_err(no + 1, format!("bad row {:?}", tok[0])))?;
        let j: usize = tok[1].parse().map_err(|_| fmt_err(no + 1, format!("bad column {:?}", tok[1])))?;
        let v: f64 = tok[2].parse().map_err(|_| fmt_err(no + 1, format!("bad value {:?}", tok[2])))?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(fmt_err(no + 1, format!("index ({i}, {j}) outside 1..={rows}")));
        }
        tb.push(i - 1, j - 1, v);
        count += 1;
    }
    if count != nnz {
        return Err(fmt_err(2, format!("header promises {nnz} entries, found {count}")));
    }
    Ok(tb.build())
}

fn parse_usizes(line: &str, no: usize) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|t| t.parse().map_err(|_| fmt_err(no, format!("bad integer {t:?}"))))
        .collect()
}

/// One value per line.
pub fn vector_string(v: &[f64]) -> String {
    let mut s = String::with_capacity(v.len() * 24);
    for x in v {
        let _ = writeln!(s, "{x:?}");
    }
    s
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    write_text(path, &vector_string(v))
}

/// Blank lines and `#` comments are skipped.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut v = vec![];
    for (no, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        v.push(
            t.parse()
                .map_err(|_| Error::format_at(path, Some(no + 1), format!("bad value {t:?}")))?,
        );
    }
    Ok(v)
}

/// `iter,resnorm,restart_index,deflated_flag` with the residual relative to
/// `||b - A x0||`. Row 0 is the starting residual.
pub fn convergence_csv(report: &SolveReport) -> String {
    let mut s = String::from("iter,resnorm,restart_index,deflated_flag\n");
    for (k, (rec, rel)) in report.history.iter().zip(report.relative_history()).enumerate() {
        let _ = writeln!(s, "{k},{rel:?},{},{}", rec.cycle, u8::from(rec.deflated));
    }
    s
}

/// `cycle,k,re,im`: `k` is the global iteration at which the Ritz values were
/// taken; rows sharing `(cycle, k)` are in ascending magnitude.
pub fn ritz_csv(report: &SolveReport) -> String {
    let mut s = String::from("cycle,k,re,im\n");
    for snap in &report.ritz_trace {
        for v in &snap.values {
            let _ = writeln!(s, "{},{},{:?},{:?}", snap.cycle, snap.iteration, v.re, v.im);
        }
    }
    s
}

pub const SUMMARY_HEADER: &str = "method,m,d,iters,converged,final_relres,setup_ms,solve_ms";

/// One row of the summary table.
pub fn summary_line(method: &str, m: usize, d: usize, report: &SolveReport) -> String {
    format!(
        "{method},{m},{d},{},{},{:?},{:?},{:?}",
        report.iterations,
        report.converged,
        report.final_relres,
        ms(report.setup_time),
        ms(report.solve_time)
    )
}

pub(crate) fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}
