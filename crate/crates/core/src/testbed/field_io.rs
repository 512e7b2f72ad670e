use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::testbed::{Grid, PermeabilityField};

/// Reads whitespace-separated permeabilities: `kx` for every cell, optionally
/// followed by `ky` and `kz` blocks. Missing blocks default to `kx`.
pub fn load_field_file(path: impl AsRef<Path>, grid: Grid) -> Result<PermeabilityField> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_field(&text, grid).map_err(|e| match e {
        Error::Format { line, msg, .. } => Error::Format {
            path: Some(path.to_path_buf()),
            line,
            msg,
        },
        other => other,
    })
}

pub(crate) fn parse_field(text: &str, grid: Grid) -> Result<PermeabilityField> {
    let n = grid.cells();
    let mut values = Vec::with_capacity(3 * n);
    for (lineno, line) in text.lines().enumerate() {
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Format {
                path: None,
                line: Some(lineno + 1),
                msg: format!("not a number: {tok:?}"),
            })?;
            values.push(v);
        }
    }
    let blocks = match values.len() {
        c if c == n => 1,
        c if c == 2 * n => 2,
        c if c == 3 * n => 3,
        c => {
            return Err(Error::format(format!(
                "expected {n}, {} or {} values for a {}x{}x{} grid, found {c}",
                2 * n,
                3 * n,
                grid.nx,
                grid.ny,
                grid.nz
            )))
        }
    };
    let kx = values[..n].to_vec();
    let ky = if blocks >= 2 { values[n..2 * n].to_vec() } else { kx.clone() };
    let kz = if blocks == 3 { values[2 * n..].to_vec() } else { kx.clone() };
    PermeabilityField::new(grid, kx, ky, kz)
}

/// Writes all three blocks, one value per line, in shortest round-trip form.
pub fn write_field_file(path: impl AsRef<Path>, field: &PermeabilityField) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for k in [field.kx(), field.ky(), field.kz()] {
        for v in k {
            writeln!(out, "{v:?}").unwrap();
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
