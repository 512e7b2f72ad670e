use std::ops::Range;

use defgmres::bench::*;
use defgmres::deflation::{build_context, ApChoice};
use defgmres::krylov::{GmresConfig, Preconditioner};
use defgmres::physics::{manual_layers, partition_to_basis};
use defgmres::testbed::cases::{bo_problem, corner_sources, sandwich_problem, BO_LAYERS};
use defgmres::testbed::{assemble_pressure, make_layered_field, BoundarySpec, Grid};

fn cfg(max: usize) -> GmresConfig {
    GmresConfig {
        max_iters: max,
        ..GmresConfig::with_restart(20)
    }
}

fn sandwich_case() -> BenchCase {
    BenchCase::assemble(
        "sandwich",
        || sandwich_problem(1e6),
        false,
        |p| Ok(Some(partition_to_basis(&manual_layers(&p.grid, &[0..1, 1..2, 2..3])?, None)?)),
    )
    .unwrap()
}

#[test]
fn median_and_timer() {
    assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    let mut calls = 0u64;
    let t = time_per_call(|| calls += 1);
    assert!(t > 0.0 && calls > 1);
}

#[test]
fn p1_with_few_indicator_columns_costs_at_most_three_products() {
    let p = bo_problem(100.0, 1.0).unwrap();
    let id = Preconditioner::Identity;
    let thirds: [Range<usize>; 3] = [0..3, 3..6, 6..10];
    for ranges in [&BO_LAYERS[..], &thirds[..]] {
        let basis = partition_to_basis(&manual_layers(&p.grid, ranges).unwrap(), None).unwrap();
        let ctx = build_context(&p.matrix, &id, basis, &p.rhs, ApChoice::A).unwrap();
        let cost = p1_cost_in_spmv(&ctx, 5);
        assert!(cost <= 3.0, "d {} cost {cost}", ranges.len());
    }
}

#[test]
fn suite_rows_and_csv() {
    let cases = [sandwich_case()];
    let methods = [
        BenchMethod::Gmres { m: 20 },
        BenchMethod::Rdgmres { m: 40, d: 3 },
        BenchMethod::Pdgmres { m: 20 },
    ];
    let r = overhead_suite(&cases, &methods, 3, &cfg(300)).unwrap();
    assert_eq!(r.rows.len(), 3);
    let csv = r.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("problem,method,m,d,iters,setup_ms,solve_ms,p1_cost_spmv"));
    assert_eq!(lines.count(), 3);

    let g = r.row("sandwich", "gmres").unwrap();
    let rd = r.row("sandwich", "rdgmres").unwrap();
    let pd = r.row("sandwich", "pdgmres").unwrap();
    // RD(40) converges inside its first cycle, before any deflation starts
    assert_eq!((g.d, rd.d, pd.d), (0, 0, 3));
    assert_eq!(g.p1_cost_spmv, 0.0);
    assert!(pd.p1_cost_spmv > 0.0 && rd.p1_cost_spmv > 0.0);
    assert!(pd.converged && rd.converged && !g.converged);
    assert!(pd.iters < rd.iters && rd.iters < g.iters);
    assert!(csv.contains(&format!("sandwich,pdgmres,20,3,{},", pd.iters)));
}

#[test]
fn deflation_wins_on_wall_time() {
    let cases = [sandwich_case()];
    let methods = [BenchMethod::Gmres { m: 20 }, BenchMethod::Pdgmres { m: 20 }];
    let r = overhead_suite(&cases, &methods, 5, &cfg(300)).unwrap();
    let g = r.row("sandwich", "gmres").unwrap();
    let pd = r.row("sandwich", "pdgmres").unwrap();
    assert!(pd.setup_ms + pd.solve_ms < g.setup_ms + g.solve_ms, "{pd:?} vs {g:?}");
    assert!(g.solve_dispersion < 0.5 && pd.solve_dispersion < 0.5, "{g:?} {pd:?}");
}

#[test]
fn too_few_repeats() {
    let cases = [sandwich_case()];
    assert!(overhead_suite(&cases, &[BenchMethod::Gmres { m: 20 }], 2, &cfg(10)).is_err());
}

#[test]
fn pdgmres_without_a_basis_is_an_error() {
    let case = BenchCase::assemble("s", || sandwich_problem(1e6), true, |_| Ok(None)).unwrap();
    assert!(overhead_suite(&[case], &[BenchMethod::Pdgmres { m: 20 }], 3, &cfg(10)).is_err());
}

#[test]
fn nested_layer_bases_do_not_lose_iterations() {
    let grid = Grid::new(6, 6, 16).unwrap();
    let layers: Vec<(Range<usize>, f64)> =
        (0..16).map(|z| (z..z + 1, if z % 2 == 0 { 1.0 } else { 1e-3 })).collect();
    let field = make_layered_field(grid, &layers).unwrap();
    // unscaled, so A is SPD and every nested Galerkin matrix is too
    let build = || assemble_pressure(&field, BoundarySpec::TopDirichlet, &corner_sources(&grid));
    let mut cases = vec![];
    for d in [2usize, 4, 8, 16] {
        let w = 16 / d;
        let ranges: Vec<Range<usize>> = (0..d).map(|k| k * w..(k + 1) * w).collect();
        cases.push(
            BenchCase::assemble(format!("d{d}"), build, true, |p| {
                Ok(Some(partition_to_basis(&manual_layers(&p.grid, &ranges)?, None)?))
            })
            .unwrap(),
        );
    }
    let r = overhead_suite(&cases, &[BenchMethod::Pdgmres { m: 20 }], 3, &cfg(3000)).unwrap();
    let iters: Vec<usize> = r.rows.iter().map(|row| row.iters).collect();
    assert!(r.rows.iter().all(|row| row.converged));
    assert_eq!(r.rows.iter().map(|row| row.d).collect::<Vec<_>>(), vec![2, 4, 8, 16]);
    assert!(r.rows[3].p1_cost_spmv > r.rows[0].p1_cost_spmv, "{:?}", r.rows);
    assert!(iters.windows(2).all(|w| w[1] <= w[0]), "{iters:?}");
}
