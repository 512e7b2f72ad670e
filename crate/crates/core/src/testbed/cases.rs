//! Canonical desk-scale problems: the layered sandwich, alternating stacks,
//! a two-layer black-oil style block and a banded thermal-recovery style slab.

use std::ops::Range;

use crate::error::Result;
use crate::testbed::{
    assemble_pressure, diagonal_scale, make_layered_field, make_sagd_like_field, point_sources, BoundarySpec, Grid,
    PermeabilityField, PressureProblem,
};

/// 7x7x3 stack `(sigma, 1, sigma)`.
pub fn sandwich_field(sigma: f64) -> Result<PermeabilityField> {
    let grid = Grid::new(7, 7, 3)?;
    make_layered_field(grid, &[(0..1, sigma), (1..2, 1.0), (2..3, sigma)])
}

/// 7x7x(2L+1) stack of alternating `eps`/`1` layers starting and ending with
/// `eps`, so `layers` high layers sit strictly between low ones.
pub fn alternating_field(layers: usize, eps: f64) -> Result<PermeabilityField> {
    let nz = 2 * layers + 1;
    let grid = Grid::new(7, 7, nz)?;
    let spec: Vec<(Range<usize>, f64)> = (0..nz)
        .map(|z| (z..z + 1, if z % 2 == 0 { eps } else { 1.0 }))
        .collect();
    make_layered_field(grid, &spec)
}

/// Unit injection in the first cell and unit production in the last cell.
pub fn corner_sources(grid: &Grid) -> Vec<f64> {
    let mut q = vec![0.0; grid.cells()];
    q[0] = 1.0;
    q[grid.cells() - 1] = -1.0;
    q
}

/// Diagonally scaled, top-Dirichlet sandwich system with corner sources.
pub fn sandwich_problem(sigma: f64) -> Result<PressureProblem> {
    let field = sandwich_field(sigma)?;
    let q = corner_sources(field.grid());
    diagonal_scale(&assemble_pressure(&field, BoundarySpec::TopDirichlet, &q)?)
}

/// Diagonally scaled, top-Dirichlet alternating stack with corner sources.
pub fn alternating_problem(layers: usize, eps: f64) -> Result<PressureProblem> {
    let field = alternating_field(layers, eps)?;
    let q = corner_sources(field.grid());
    diagonal_scale(&assemble_pressure(&field, BoundarySpec::TopDirichlet, &q)?)
}

/// Layer split of the two-layer block: z in 0..5 and 5..10.
pub const BO_LAYERS: [Range<usize>; 2] = [0..5, 5..10];

/// 15x15x10 block with permeability `top` above `bottom`.
pub fn bo_field(top: f64, bottom: f64) -> Result<PermeabilityField> {
    let grid = Grid::new(15, 15, 10)?;
    make_layered_field(grid, &[(BO_LAYERS[0].clone(), top), (BO_LAYERS[1].clone(), bottom)])
}

/// Two injectors at the bottom corners, seven producers in the top layer.
pub fn bo_wells() -> Vec<(usize, usize, usize, f64)> {
    vec![
        (0, 0, 9, 3.5),
        (14, 14, 9, 3.5),
        (7, 7, 2, -1.0),
        (0, 14, 2, -1.0),
        (14, 0, 2, -1.0),
        (7, 0, 2, -1.0),
        (0, 7, 2, -1.0),
        (14, 7, 2, -1.0),
        (7, 14, 2, -1.0),
    ]
}

/// Diagonally scaled two-layer problem, high permeability on top by default
/// (`top = 100`, `bottom = 1`).
pub fn bo_problem(top: f64, bottom: f64) -> Result<PressureProblem> {
    let field = bo_field(top, bottom)?;
    let q = point_sources(field.grid(), &bo_wells())?;
    diagonal_scale(&assemble_pressure(&field, BoundarySpec::TopDirichlet, &q)?)
}

/// Active slab of the banded problem.
pub const SAGD_ACTIVE: Range<usize> = 21..64;

/// Band edges inside the active slab.
pub const SAGD_EDGES: [usize; 13] = [21, 24, 28, 31, 35, 38, 42, 46, 49, 53, 56, 60, 64];

/// Alternating high/low band values with contrasts of order 1e3.
pub const SAGD_VALUES: [f64; 12] = [300.0, 0.5, 800.0, 1.0, 2000.0, 1.0, 500.0, 0.8, 1500.0, 1.0, 400.0, 2.0];

pub fn sagd_bands() -> Vec<(Range<usize>, f64)> {
    let mut bands = vec![(0..SAGD_ACTIVE.start, 0.0)];
    for (w, v) in SAGD_EDGES.windows(2).zip(SAGD_VALUES) {
        bands.push((w[0]..w[1], v));
    }
    bands.push((SAGD_ACTIVE.end..85, 0.0));
    bands
}

/// 41x1x85 slab: zero-permeability bands above and below twelve active bands.
pub fn sagd_field() -> Result<PermeabilityField> {
    make_sagd_like_field(Grid::new(41, 1, 85)?, &sagd_bands())
}

/// Injector above producer near the bottom of the active slab.
pub fn sagd_wells() -> Vec<(usize, usize, usize, f64)> {
    vec![(20, 0, 58, 1.0), (20, 0, 62, -1.0)]
}

/// The ten bands nearest the wells, one deflation layer each.
pub fn sagd_layer_ranges() -> Vec<Range<usize>> {
    SAGD_EDGES[2..].windows(2).map(|w| w[0]..w[1]).collect()
}

/// Unscaled banded problem; solved with right Jacobi preconditioning.
pub fn sagd_problem() -> Result<PressureProblem> {
    let field = sagd_field()?;
    let q = point_sources(field.grid(), &sagd_wells())?;
    assemble_pressure(&field, BoundarySpec::TopDirichlet, &q)
}
