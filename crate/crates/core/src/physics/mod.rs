//! Deflation vectors built from the grid and the permeability field instead
//! of from the Krylov process.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;
use std::time::Instant;

use crate::deflation::{build_context, ApChoice, BasisColumn, DeflationBasis};
use crate::error::{check_len, Error, Result};
use crate::krylov::{gmres, GmresConfig, Preconditioner, SolveReport};
use crate::linalg::SparseMatrix;
use crate::testbed::{Grid, PermeabilityField};

/// Default band separation for levelset detection, in decades of permeability.
pub const DEFAULT_JUMP_THRESHOLD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionKind {
    Subdomain,
    Levelset,
    SubdomainLevelset,
    Manual,
}

/// Non-overlapping labelling of the grid cells.
///
/// Labels are numbered by the lowest linear cell index of their region.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    labels: Vec<usize>,
    d: usize,
    kind: PartitionKind,
    inactive: Vec<usize>,
    remainder: Option<usize>,
}

impl Partition {
    /// Validates that every label in `[0, max]` is used and renumbers them
    /// canonically.
    pub fn from_labels(labels: Vec<usize>, kind: PartitionKind) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("partition of an empty grid"));
        }
        let max = labels.iter().copied().max().unwrap_or(0);
        let mut used = vec![false; max + 1];
        for &l in &labels {
            used[l] = true;
        }
        if let Some(l) = used.iter().position(|u| !u) {
            return Err(Error::invalid(format!("label {l} is not used by any cell")));
        }
        let (labels, _) = canonical(&labels);
        Ok(Partition {
            d: max + 1,
            labels,
            kind,
            inactive: vec![],
            remainder: None,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of labels, including inactive and remainder ones.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> PartitionKind {
        self.kind
    }

    /// Labels of zero-permeability regions.
    pub fn inactive_labels(&self) -> &[usize] {
        &self.inactive
    }

    /// Label shared by the cells outside every manual range.
    pub fn remainder_label(&self) -> Option<usize> {
        self.remainder
    }

    /// Cell count per label.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.d];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    /// Two partitions are equivalent when they differ only by a renaming of
    /// labels.
    pub fn equivalent(&self, other: &Partition) -> bool {
        self.labels.len() == other.labels.len() && self.d == other.d && {
            let mut fwd = vec![usize::MAX; self.d];
            let mut bwd = vec![usize::MAX; other.d];
            self.labels.iter().zip(&other.labels).all(|(&a, &b)| {
                let ok = (fwd[a] == usize::MAX || fwd[a] == b) && (bwd[b] == usize::MAX || bwd[b] == a);
                fwd[a] = b;
                bwd[b] = a;
                ok
            })
        }
    }
}

/// Renumbers labels by first occurrence. Returns the map old -> new.
fn canonical(labels: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let max = labels.iter().copied().max().unwrap_or(0);
    let mut map = vec![usize::MAX; max + 1];
    let mut next = 0;
    let out = labels
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect();
    (out, map)
}

/// Start of block `b` when `n` items are split into `p` near-equal blocks,
/// larger blocks first.
#[cfg(test)]
fn block_start(n: usize, p: usize, b: usize) -> usize {
    let base = n / p;
    let extra = n % p;
    b * base + b.min(extra)
}

fn block_of(n: usize, p: usize, i: usize) -> usize {
    let base = n / p;
    let extra = n % p;
    let cut = extra * (base + 1);
    if i < cut {
        i / (base + 1)
    } else {
        extra + (i - cut) / base
    }
}

fn check_boxes(grid: &Grid, px: usize, py: usize, pz: usize) -> Result<()> {
    for (p, n, axis) in [(px, grid.nx, 'x'), (py, grid.ny, 'y'), (pz, grid.nz, 'z')] {
        if p == 0 || p > n {
            return Err(Error::invalid(format!(
                "need 1 <= p{axis} <= n{axis}, got p{axis} = {p} with n{axis} = {n}"
            )));
        }
    }
    Ok(())
}

fn box_labels(grid: &Grid, px: usize, py: usize, pz: usize) -> Vec<usize> {
    (0..grid.cells())
        .map(|i| {
            let (x, y, z) = grid.coords(i);
            let (bx, by, bz) = (block_of(grid.nx, px, x), block_of(grid.ny, py, y), block_of(grid.nz, pz, z));
            bx + px * (by + py * bz)
        })
        .collect()
}

/// `px x py x pz` near-equal axis-aligned boxes.
pub fn subdomain_partition(grid: &Grid, px: usize, py: usize, pz: usize) -> Result<Partition> {
    check_boxes(grid, px, py, pz)?;
    Partition::from_labels(box_labels(grid, px, py, pz), PartitionKind::Subdomain)
}

/// Splits sorted unique log-permeabilities wherever consecutive values are at
/// least `threshold` apart; returns the upper bound of each band but the last.
fn band_cuts(mut logs: Vec<f64>, threshold: f64) -> Vec<f64> {
    logs.sort_by(f64::total_cmp);
    logs.dedup();
    logs.windows(2)
        .filter(|w| w[1] - w[0] >= threshold)
        .map(|w| w[0])
        .collect()
}

/// Band id per cell for the given cells; zero-permeability cells get `None`.
fn bands(field: &PermeabilityField, cells: &[usize], threshold: f64) -> Result<Vec<Option<usize>>> {
    let k = field.kx();
    let mut logs = Vec::with_capacity(cells.len());
    for &i in cells {
        if field.is_active(i) {
            if !(k[i] > 0.0) || !k[i].is_finite() {
                return Err(Error::invalid(format!(
                    "cell {i} is connected but has permeability {}",
                    k[i]
                )));
            }
            logs.push(k[i].log10());
        }
    }
    let cuts = band_cuts(logs, threshold);
    Ok(cells
        .iter()
        .map(|&i| {
            field
                .is_active(i)
                .then(|| cuts.partition_point(|&c| c < k[i].log10()))
        })
        .collect())
}

/// Connected components of equal band id among `cells`. Writes component
/// labels starting at `*next` into `out`; returns the labels given to
/// zero-permeability components.
fn components(
    grid: &Grid,
    cells: &[usize],
    band: &[Option<usize>],
    out: &mut [usize],
    next: &mut usize,
) -> Vec<usize> {
    let n = grid.cells();
    // position of each cell inside `cells`, usize::MAX outside
    let mut local = vec![usize::MAX; n];
    for (p, &i) in cells.iter().enumerate() {
        local[i] = p;
    }
    let mut seen = vec![false; cells.len()];
    let mut inactive = vec![];
    let mut queue = VecDeque::new();
    for start in 0..cells.len() {
        if seen[start] {
            continue;
        }
        let label = *next;
        *next += 1;
        if band[start].is_none() {
            inactive.push(label);
        }
        seen[start] = true;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            out[cells[p]] = label;
            for (j, _) in grid.neighbors(cells[p]) {
                let q = local[j];
                if q != usize::MAX && !seen[q] && band[q] == band[start] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    inactive
}

fn check_threshold(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("jump threshold must be positive, got {t}")));
    }
    Ok(())
}

fn finish_levelset(labels: Vec<usize>, inactive: Vec<usize>, kind: PartitionKind) -> Partition {
    let (labels, map) = canonical(&labels);
    let mut inactive: Vec<usize> = inactive.into_iter().map(|l| map[l]).collect();
    inactive.sort_unstable();
    let d = map.iter().filter(|&&m| m != usize::MAX).count();
    Partition {
        labels,
        d,
        kind,
        inactive,
        remainder: None,
    }
}

/// Connected regions of similar permeability. Values are grouped into bands
/// separated by gaps of at least `jump_threshold` decades in `log10(kx)`.
pub fn levelset_partition(field: &PermeabilityField, jump_threshold: f64) -> Result<Partition> {
    check_threshold(jump_threshold)?;
    let grid = field.grid();
    let cells: Vec<usize> = (0..grid.cells()).collect();
    let band = bands(field, &cells, jump_threshold)?;
    let mut labels = vec![0; grid.cells()];
    let mut next = 0;
    let inactive = components(grid, &cells, &band, &mut labels, &mut next);
    Ok(finish_levelset(labels, inactive, PartitionKind::Levelset))
}

/// Levelset detection run separately inside each of the `px x py x pz` boxes.
pub fn subdomain_levelset_partition(
    field: &PermeabilityField,
    px: usize,
    py: usize,
    pz: usize,
    jump_threshold: f64,
) -> Result<Partition> {
    check_threshold(jump_threshold)?;
    let grid = field.grid();
    check_boxes(grid, px, py, pz)?;
    let boxes = box_labels(grid, px, py, pz);
    let mut members = vec![vec![]; px * py * pz];
    for (i, &b) in boxes.iter().enumerate() {
        members[b].push(i);
    }
    let mut labels = vec![0; grid.cells()];
    let mut next = 0;
    let mut inactive = vec![];
    for cells in &members {
        let band = bands(field, cells, jump_threshold)?;
        inactive.extend(components(grid, cells, &band, &mut labels, &mut next));
    }
    Ok(finish_levelset(labels, inactive, PartitionKind::SubdomainLevelset))
}

/// One label per z-range. Cells outside every range share an extra
/// remainder label.
pub fn manual_layers(grid: &Grid, z_ranges: &[Range<usize>]) -> Result<Partition> {
    if z_ranges.is_empty() {
        return Err(Error::invalid("no layer ranges given"));
    }
    let mut owner = vec![usize::MAX; grid.nz];
    for (r, range) in z_ranges.iter().enumerate() {
        if range.start >= range.end || range.end > grid.nz {
            return Err(Error::invalid(format!(
                "layer range {}..{} is empty or outside 0..{}",
                range.start, range.end, grid.nz
            )));
        }
        for z in range.clone() {
            if owner[z] != usize::MAX {
                return Err(Error::invalid(format!("layer ranges overlap at z = {z}")));
            }
            owner[z] = r;
        }
    }
    let rest = z_ranges.len();
    let raw: Vec<usize> = (0..grid.cells())
        .map(|i| {
            let o = owner[grid.coords(i).2];
            if o == usize::MAX {
                rest
            } else {
                o
            }
        })
        .collect();
    let has_rest = owner.contains(&usize::MAX);
    let (labels, map) = canonical(&raw);
    Ok(Partition {
        labels,
        d: rest + usize::from(has_rest),
        kind: PartitionKind::Manual,
        inactive: vec![],
        remainder: has_rest.then(|| map[rest]),
    })
}

/// Indicator columns, one per label not excluded. `None` excludes the
/// zero-permeability labels.
pub fn partition_to_basis(p: &Partition, exclude: Option<&[usize]>) -> Result<DeflationBasis> {
    let exclude = exclude.unwrap_or(&p.inactive);
    let mut members = vec![vec![]; p.d];
    for (i, &l) in p.labels.iter().enumerate() {
        members[l].push(i);
    }
    let cols: Vec<BasisColumn> = members
        .into_iter()
        .enumerate()
        .filter(|(l, _)| !exclude.contains(l))
        .map(|(_, idx)| BasisColumn::indicator(idx))
        .collect();
    if cols.is_empty() {
        return Err(Error::invalid("no deflation vectors left after exclusion"));
    }
    DeflationBasis::new(p.labels.len(), cols)
}

/// GMRES deflated from the first iteration with a fixed basis. The report's
/// `setup_time` covers building the coarse system.
pub fn pdgmres(
    a: &SparseMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    precond: &Preconditioner,
    cfg: &GmresConfig,
    basis: DeflationBasis,
    ap: ApChoice,
) -> Result<SolveReport> {
    let t = Instant::now();
    let ctx = build_context(a, precond, basis, b, ap)?;
    let setup = t.elapsed();
    let mut report = gmres(a, b, x0, precond, cfg, Some(&ctx))?;
    report.setup_time += setup;
    report.solve_time += setup;
    Ok(report)
}

/// One label per line in linear cell order.
pub fn write_partition(path: &Path, p: &Partition) -> Result<()> {
    let mut s = String::with_capacity(p.labels.len() * 3);
    for l in &p.labels {
        let _ = writeln!(s, "{l}");
    }
    crate::io::write_text(path, &s)
}

pub fn read_partition(path: &Path, grid: &Grid) -> Result<Partition> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::with_capacity(grid.cells());
    for (no, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let l = t
            .parse::<usize>()
            .map_err(|_| Error::format_at(path, Some(no + 1), format!("bad label {t:?}")))?;
        labels.push(l);
    }
    check_len(grid.cells(), labels.len())
        .map_err(|_| Error::format_at(path, None, format!("expected {} labels, got {}", grid.cells(), labels.len())))?;
    Partition::from_labels(labels, PartitionKind::Manual)
}
