//! Structured-grid pressure equation: grids, permeability fields, two-point
//! flux assembly and diagonal scaling.

pub mod cases;
mod field_io;

use std::ops::Range;

use crate::error::{check_len, Error, Result};
use crate::linalg::{SparseMatrix, TripletBuilder};

pub use field_io::{load_field_file, write_field_file};

/// Cartesian cell grid. Cell `(ix, iy, iz)` has linear index
/// `ix + nx * (iy + ny * iz)`; `iz = 0` is the top layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        Self::with_spacing(nx, ny, nz, 1.0, 1.0, 1.0)
    }

    pub fn with_spacing(nx: usize, ny: usize, nz: usize, dx: f64, dy: f64, dz: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::invalid("grid dimensions must be at least 1"));
        }
        if !(dx > 0.0 && dy > 0.0 && dz > 0.0) || !(dx.is_finite() && dy.is_finite() && dz.is_finite()) {
            return Err(Error::invalid("grid spacing must be positive and finite"));
        }
        Ok(Grid {
            nx,
            ny,
            nz,
            dx,
            dy,
            dz,
        })
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        debug_assert!(ix < self.nx && iy < self.ny && iz < self.nz);
        ix + self.nx * (iy + self.ny * iz)
    }

    pub fn coords(&self, i: usize) -> (usize, usize, usize) {
        (i % self.nx, (i / self.nx) % self.ny, i / (self.nx * self.ny))
    }

    /// Face neighbours of cell `i` with the axis (0 = x, 1 = y, 2 = z) of the
    /// shared face.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (ix, iy, iz) = self.coords(i);
        let cand = [
            (ix > 0).then(|| (i - 1, 0)),
            (ix + 1 < self.nx).then(|| (i + 1, 0)),
            (iy > 0).then(|| (i - self.nx, 1)),
            (iy + 1 < self.ny).then(|| (i + self.nx, 1)),
            (iz > 0).then(|| (i - self.nx * self.ny, 2)),
            (iz + 1 < self.nz).then(|| (i + self.nx * self.ny, 2)),
        ];
        cand.into_iter().flatten()
    }
}

/// Per-cell, per-axis permeabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PermeabilityField {
    grid: Grid,
    kx: Vec<f64>,
    ky: Vec<f64>,
    kz: Vec<f64>,
}

impl PermeabilityField {
    pub fn new(grid: Grid, kx: Vec<f64>, ky: Vec<f64>, kz: Vec<f64>) -> Result<Self> {
        let n = grid.cells();
        for k in [&kx, &ky, &kz] {
            check_len(n, k.len())?;
            if let Some(v) = k.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return Err(Error::invalid(format!("permeability {v} is not a finite value >= 0")));
            }
        }
        Ok(PermeabilityField { grid, kx, ky, kz })
    }

    pub fn isotropic(grid: Grid, k: Vec<f64>) -> Result<Self> {
        Self::new(grid, k.clone(), k.clone(), k)
    }

    pub fn homogeneous(grid: Grid, k: f64) -> Result<Self> {
        Self::isotropic(grid, vec![k; grid.cells()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kx(&self) -> &[f64] {
        &self.kx
    }

    pub fn ky(&self) -> &[f64] {
        &self.ky
    }

    pub fn kz(&self) -> &[f64] {
        &self.kz
    }

    fn axis(&self, axis: usize) -> &[f64] {
        match axis {
            0 => &self.kx,
            1 => &self.ky,
            _ => &self.kz,
        }
    }

    /// A cell takes part in the system when any of its permeabilities is positive.
    pub fn is_active(&self, i: usize) -> bool {
        self.kx[i] > 0.0 || self.ky[i] > 0.0 || self.kz[i] > 0.0
    }

    /// Two-point transmissibility of the face between face-neighbours `i`
    /// and `j` along `axis`.
    pub fn transmissibility(&self, i: usize, j: usize, axis: usize) -> f64 {
        let k = self.axis(axis);
        let g = &self.grid;
        let geom = match axis {
            0 => g.dy * g.dz / g.dx,
            1 => g.dx * g.dz / g.dy,
            _ => g.dx * g.dy / g.dz,
        };
        harmonic_mean(k[i], k[j]) * geom
    }
}

pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

fn check_z_cover(nz: usize, ranges: &[(Range<usize>, f64)]) -> Result<()> {
    let mut order: Vec<usize> = (0..ranges.len()).collect();
    order.sort_by_key(|&i| ranges[i].0.start);
    let mut next = 0;
    for &i in &order {
        let r = &ranges[i].0;
        if r.start >= r.end {
            return Err(Error::invalid(format!("empty z-range {}..{}", r.start, r.end)));
        }
        if r.start < next {
            return Err(Error::invalid(format!("z-range {}..{} overlaps", r.start, r.end)));
        }
        if r.start > next {
            return Err(Error::invalid(format!("z-layers {}..{} are not covered", next, r.start)));
        }
        next = r.end;
    }
    if next != nz {
        return Err(Error::invalid(format!("z-ranges end at {next}, grid has {nz} layers")));
    }
    Ok(())
}

/// Isotropic field constant on each z-range; the ranges must tile `0..nz`.
pub fn make_layered_field(grid: Grid, layers: &[(Range<usize>, f64)]) -> Result<PermeabilityField> {
    check_z_cover(grid.nz, layers)?;
    if let Some((_, v)) = layers.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid(format!("layer permeability {v} must be positive")));
    }
    let k = layer_values(&grid, layers);
    PermeabilityField::isotropic(grid, k)
}

/// Banded field with `kx = ky` from the bands and `kz = kx / 2`; zero bands are
/// allowed.
pub fn make_sagd_like_field(grid: Grid, bands: &[(Range<usize>, f64)]) -> Result<PermeabilityField> {
    check_z_cover(grid.nz, bands)?;
    if let Some((_, v)) = bands.iter().find(|(_, v)| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid(format!("band permeability {v} must be >= 0")));
    }
    let k = layer_values(&grid, bands);
    let kz = k.iter().map(|v| v / 2.0).collect();
    PermeabilityField::new(grid, k.clone(), k, kz)
}

fn layer_values(grid: &Grid, layers: &[(Range<usize>, f64)]) -> Vec<f64> {
    let mut per_z = vec![0.0; grid.nz];
    for (r, v) in layers {
        for z in r.clone() {
            per_z[z] = *v;
        }
    }
    (0..grid.cells()).map(|i| per_z[grid.coords(i).2]).collect()
}

/// Outer boundary treatment of the pressure equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundarySpec {
    /// No-flow on every face.
    NeumannAll,
    /// No-flow everywhere except zero pressure above the topmost active cell of
    /// every vertical column.
    #[default]
    TopDirichlet,
}

/// Assembled linear system `A p = b` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureProblem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    /// `1 / a_ii` of the unscaled matrix when diagonal scaling was applied.
    pub scaling: Option<Vec<f64>>,
    pub grid: Grid,
}

/// Point sources `(ix, iy, iz, rate)` as a per-cell source vector.
pub fn point_sources(grid: &Grid, wells: &[(usize, usize, usize, f64)]) -> Result<Vec<f64>> {
    let mut q = vec![0.0; grid.cells()];
    for &(ix, iy, iz, rate) in wells {
        if ix >= grid.nx || iy >= grid.ny || iz >= grid.nz {
            return Err(Error::invalid(format!("source ({ix},{iy},{iz}) lies outside the grid")));
        }
        q[grid.index(ix, iy, iz)] += rate;
    }
    Ok(q)
}

/// Two-point flux discretization of `-div(k grad p) = q`.
pub fn assemble_pressure(field: &PermeabilityField, bc: BoundarySpec, q: &[f64]) -> Result<PressureProblem> {
    let grid = *field.grid();
    let n = grid.cells();
    check_len(n, q.len())?;
    if let Some(v) = q.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("source rate {v} is not finite")));
    }

    // topmost cell with vertical permeability in each (ix, iy) column
    let columns = grid.nx * grid.ny;
    let mut top_active = vec![usize::MAX; columns];
    if bc == BoundarySpec::TopDirichlet {
        for (c, top) in top_active.iter_mut().enumerate() {
            if let Some(iz) = (0..grid.nz).find(|&iz| field.kz()[c + columns * iz] > 0.0) {
                *top = iz;
            }
        }
    }
    let dirichlet_t = grid.dx * grid.dy / (grid.dz / 2.0);

    let mut b = TripletBuilder::new(n);
    let mut rhs = vec![0.0; n];
    let mut anchored = vec![false; n];
    for i in 0..n {
        let mut diag = 0.0;
        for (j, axis) in grid.neighbors(i) {
            let t = field.transmissibility(i, j, axis);
            if t > 0.0 {
                b.push(i, j, -t);
                diag += t;
            }
        }
        let (ix, iy, iz) = grid.coords(i);
        if bc == BoundarySpec::TopDirichlet && top_active[ix + grid.nx * iy] == iz {
            diag += field.kz()[i] * dirichlet_t;
            anchored[i] = true;
        }
        if diag > 0.0 {
            b.push(i, i, diag);
            rhs[i] = q[i];
        } else {
            if q[i] != 0.0 {
                return Err(Error::invalid(format!(
                    "source at cell {i} which has no flow connections"
                )));
            }
            b.push(i, i, 1.0);
        }
    }
    let matrix = b.build();
    check_compatibility(&matrix, &anchored, field, q)?;
    Ok(PressureProblem {
        matrix,
        rhs,
        scaling: None,
        grid,
    })
}

/// Every connected component without a Dirichlet face must have sources that
/// sum to zero.
fn check_compatibility(a: &SparseMatrix, anchored: &[bool], field: &PermeabilityField, q: &[f64]) -> Result<()> {
    let n = a.n();
    let mut seen = vec![false; n];
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] || !field.is_active(start) {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut has_dirichlet = false;
        let (mut sum, mut abs) = (0.0, 0.0);
        while let Some(i) = stack.pop() {
            has_dirichlet |= anchored[i];
            sum += q[i];
            abs += q[i].abs();
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j != i && v != 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if !has_dirichlet && sum.abs() > 1e-12 * abs {
            return Err(Error::SingularProblem(format!(
                "sources in the no-flow region containing cell {start} sum to {sum:e}"
            )));
        }
    }
    Ok(())
}

/// Returns `D^-1 A`, `D^-1 b` with `D = diag(A)`; the new diagonal is exactly 1.
pub fn diagonal_scale(p: &PressureProblem) -> Result<PressureProblem> {
    let d = p.matrix.diagonal();
    if let Some(i) = d.iter().position(|v| *v == 0.0) {
        return Err(Error::invalid(format!("zero diagonal in row {i}")));
    }
    let a = &p.matrix;
    let mut values = Vec::with_capacity(a.nnz());
    for i in 0..a.n() {
        let (_, vals) = a.row(i);
        values.extend(vals.iter().map(|v| v / d[i]));
    }
    let matrix = SparseMatrix::new(a.n(), a.row_offsets().to_vec(), a.col_indices().to_vec(), values)?;
    let rhs = p.rhs.iter().zip(&d).map(|(b, di)| b / di).collect();
    Ok(PressureProblem {
        matrix,
        rhs,
        scaling: Some(d.iter().map(|v| 1.0 / v).collect()),
        grid: p.grid,
    })
}
