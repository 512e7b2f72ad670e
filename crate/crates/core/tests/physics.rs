mod common;

use common::*;
use defgmres::deflation::ApChoice;
use defgmres::harmonic::rdgmres;
use defgmres::krylov::{gmres, GmresConfig, Preconditioner};
use defgmres::physics::*;
use defgmres::testbed::cases::*;
use defgmres::testbed::{Grid, PermeabilityField};
use proptest::prelude::*;

fn ztz(basis: &defgmres::deflation::DeflationBasis) -> Vec<Vec<f64>> {
    let n = basis.n();
    let cols: Vec<Vec<f64>> = (0..basis.d()).map(|j| basis.column_dense(j)).collect();
    assert!(cols.iter().all(|c| c.len() == n));
    cols.iter().map(|a| cols.iter().map(|b| dot(a, b)).collect()).collect()
}

fn assert_diagonal_gram(p: &Partition, basis: &defgmres::deflation::DeflationBasis, kept: &[usize]) {
    let g = ztz(basis);
    let sizes = p.sizes();
    for (i, row) in g.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i == j {
                assert_eq!(*v, sizes[kept[i]] as f64);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }
}

fn field_from(grid: Grid, f: impl Fn(usize, usize, usize) -> f64) -> PermeabilityField {
    let k = (0..grid.cells())
        .map(|i| {
            let (x, y, z) = grid.coords(i);
            f(x, y, z)
        })
        .collect();
    PermeabilityField::isotropic(grid, k).unwrap()
}

#[test]
fn four_subdomains_on_a_four_by_four_grid() {
    let grid = Grid::new(4, 4, 1).unwrap();
    let p = subdomain_partition(&grid, 2, 2, 1).unwrap();
    assert_eq!(p.d(), 4);
    assert_eq!(p.kind(), PartitionKind::Subdomain);
    #[rustfmt::skip]
    let expected = vec![
        0, 0, 1, 1,
        0, 0, 1, 1,
        2, 2, 3, 3,
        2, 2, 3, 3,
    ];
    assert_eq!(p.labels(), expected.as_slice());
    let basis = partition_to_basis(&p, None).unwrap();
    assert_eq!(basis.d(), 4);
    assert_diagonal_gram(&p, &basis, &[0, 1, 2, 3]);
}

#[test]
fn subdomain_counts_and_errors() {
    let g = Grid::new(18, 22, 8).unwrap();
    let p = subdomain_partition(&g, 2, 2, 2).unwrap();
    assert_eq!(p.d(), 8);
    assert!(p.sizes().iter().all(|&s| s == 9 * 11 * 4));
    assert_eq!(subdomain_partition(&g, 3, 3, 3).unwrap().d(), 27);
    assert_eq!(subdomain_partition(&g, 4, 4, 4).unwrap().d(), 64);

    let one = subdomain_partition(&g, 1, 1, 1).unwrap();
    assert_eq!(one.d(), 1);
    let basis = partition_to_basis(&one, None).unwrap();
    assert_eq!(basis.column_dense(0), vec![1.0; g.cells()]);

    let small = Grid::new(3, 3, 1).unwrap();
    assert!(subdomain_partition(&small, 4, 1, 1).is_err());
    assert!(subdomain_partition(&small, 1, 1, 2).is_err());
    assert!(subdomain_partition(&small, 0, 1, 1).is_err());
    // remainders go to the leading blocks
    let uneven = subdomain_partition(&Grid::new(5, 1, 1).unwrap(), 2, 1, 1).unwrap();
    assert_eq!(uneven.labels(), &[0, 0, 0, 1, 1]);
}

#[test]
fn sandwich_layers_are_found_exactly() {
    let field = sandwich_field(1e6).unwrap();
    let grid = *field.grid();
    let p = levelset_partition(&field, DEFAULT_JUMP_THRESHOLD).unwrap();
    assert_eq!(p.d(), 3);
    assert_eq!(p.kind(), PartitionKind::Levelset);
    for i in 0..grid.cells() {
        assert_eq!(p.labels()[i], grid.coords(i).2);
    }
}

#[test]
fn homogeneous_field_gives_one_region() {
    let field = PermeabilityField::homogeneous(Grid::new(5, 4, 3).unwrap(), 7.0).unwrap();
    let p = levelset_partition(&field, 2.0).unwrap();
    assert_eq!(p.d(), 1);
    assert_eq!(partition_to_basis(&p, None).unwrap().column_dense(0), vec![1.0; 60]);
}

#[test]
fn l_shaped_region() {
    let grid = Grid::new(4, 4, 1).unwrap();
    let field = field_from(grid, |x, y, _| if x == 0 || y == 0 { 1.0 } else { 1e-4 });
    let p = levelset_partition(&field, 2.0).unwrap();
    assert_eq!(p.d(), 2);
    for i in 0..16 {
        let (x, y, _) = grid.coords(i);
        assert_eq!(p.labels()[i], usize::from(!(x == 0 || y == 0)));
    }
    // the same values split by a smaller-than-threshold gap stay together
    assert_eq!(levelset_partition(&field, 5.0).unwrap().d(), 1);
    assert!(levelset_partition(&field, 0.0).is_err());
}

#[test]
fn disconnected_band_gives_separate_regions() {
    let grid = Grid::new(5, 1, 1).unwrap();
    let field = field_from(grid, |x, _, _| if x == 2 { 1e-5 } else { 1.0 });
    let p = levelset_partition(&field, 2.0).unwrap();
    assert_eq!(p.d(), 3);
    assert_eq!(p.labels(), &[0, 0, 1, 2, 2]);
}

#[test]
fn subdomain_levelset_on_a_diagonal_contrast() {
    let grid = Grid::new(4, 4, 1).unwrap();
    let field = field_from(grid, |x, y, _| if x + y < 4 { 1.0 } else { 1e-4 });
    let p = subdomain_levelset_partition(&field, 2, 1, 1, 2.0).unwrap();
    assert_eq!(p.d(), 4);
    assert_eq!(p.kind(), PartitionKind::SubdomainLevelset);
    let boxes = subdomain_partition(&grid, 2, 1, 1).unwrap();
    let lev = levelset_partition(&field, 2.0).unwrap();
    // every region sits in one box and one band
    for l in 0..p.d() {
        let cells: Vec<usize> = (0..16).filter(|&i| p.labels()[i] == l).collect();
        assert!(cells.iter().all(|&i| boxes.labels()[i] == boxes.labels()[cells[0]]));
        assert!(cells.iter().all(|&i| lev.labels()[i] == lev.labels()[cells[0]]));
    }
    let basis = partition_to_basis(&p, None).unwrap();
    assert_diagonal_gram(&p, &basis, &[0, 1, 2, 3]);
}

#[test]
fn reduction_properties() {
    let grid = Grid::new(6, 5, 4).unwrap();
    let hom = PermeabilityField::homogeneous(grid, 3.0).unwrap();
    for (px, py, pz) in [(1, 1, 1), (2, 1, 1), (3, 5, 2), (6, 5, 4)] {
        let a = subdomain_levelset_partition(&hom, px, py, pz, 2.0).unwrap();
        let b = subdomain_partition(&grid, px, py, pz).unwrap();
        assert!(a.equivalent(&b), "{px}x{py}x{pz}");
    }
    let sandwich = sandwich_field(1e6).unwrap();
    let a = subdomain_levelset_partition(&sandwich, 1, 1, 1, 2.0).unwrap();
    let b = levelset_partition(&sandwich, 2.0).unwrap();
    assert!(a.equivalent(&b));
    assert_eq!(a.labels(), b.labels());
}

#[test]
fn zero_permeability_cells_are_inactive() {
    let field = sagd_field().unwrap();
    let p = levelset_partition(&field, 2.0).unwrap();
    assert!(!p.inactive_labels().is_empty());
    let basis = partition_to_basis(&p, None).unwrap();
    assert_eq!(basis.d(), p.d() - p.inactive_labels().len());
    let grid = field.grid();
    for j in 0..basis.d() {
        for (i, v) in basis.column_dense(j).iter().enumerate() {
            if *v != 0.0 {
                assert!(field.is_active(i), "cell {i} at {:?}", grid.coords(i));
            }
        }
    }
}

#[test]
fn manual_layer_examples() {
    let bo = Grid::new(15, 15, 10).unwrap();
    let p = manual_layers(&bo, &BO_LAYERS).unwrap();
    assert_eq!(p.d(), 2);
    assert_eq!(p.remainder_label(), None);
    assert_eq!(p.sizes(), vec![1125, 1125]);

    let spe5 = Grid::new(7, 7, 3).unwrap();
    assert_eq!(manual_layers(&spe5, &[0..1, 1..2, 2..3]).unwrap().d(), 3);

    let sagd = sagd_field().unwrap();
    let p = manual_layers(sagd.grid(), &sagd_layer_ranges()).unwrap();
    assert_eq!(p.d(), 11);
    let rest = p.remainder_label().unwrap();
    let basis = partition_to_basis(&p, Some(&[rest])).unwrap();
    assert_eq!(basis.d(), 10);
    let kept: Vec<usize> = (0..p.d()).filter(|&l| l != rest).collect();
    assert_diagonal_gram(&p, &basis, &kept);

    assert!(manual_layers(&spe5, &[0..2, 1..3]).is_err());
    assert!(manual_layers(&spe5, &[0..4]).is_err());
    assert!(manual_layers(&spe5, &[1..1]).is_err());
    assert!(manual_layers(&spe5, &[]).is_err());
}

#[test]
fn basis_exclusion_errors() {
    let g = Grid::new(2, 2, 1).unwrap();
    let p = subdomain_partition(&g, 1, 1, 1).unwrap();
    assert!(partition_to_basis(&p, Some(&[0])).is_err());
}

#[test]
fn from_labels_validates() {
    assert!(Partition::from_labels(vec![0, 2, 2], PartitionKind::Manual).is_err());
    assert!(Partition::from_labels(vec![], PartitionKind::Manual).is_err());
    let p = Partition::from_labels(vec![3, 1, 0, 2, 3], PartitionKind::Manual).unwrap();
    assert_eq!(p.labels(), &[0, 1, 2, 3, 0]);
    assert_eq!(p.d(), 4);
}

#[test]
fn partition_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.txt");
    let field = sandwich_field(1e6).unwrap();
    let p = levelset_partition(&field, 2.0).unwrap();
    write_partition(&path, &p).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), field.grid().cells());
    assert_eq!(text.lines().next(), Some("0"));
    let q = read_partition(&path, field.grid()).unwrap();
    assert_eq!(q.labels(), p.labels());
    assert_eq!(q.kind(), PartitionKind::Manual);

    std::fs::write(&path, "0\n1\nx\n").unwrap();
    let err = read_partition(&path, &Grid::new(3, 1, 1).unwrap()).unwrap_err().to_string();
    assert!(err.contains(":3") || err.contains("line 3"), "{err}");
    std::fs::write(&path, "0\n1\n").unwrap();
    assert!(read_partition(&path, &Grid::new(3, 1, 1).unwrap()).is_err());
}

fn solve_cfg(m: usize, max: usize) -> GmresConfig {
    GmresConfig {
        max_iters: max,
        ..GmresConfig::with_restart(m)
    }
}

#[test]
fn sandwich_layer_deflation_is_fastest() {
    let p = sandwich_problem(1e6).unwrap();
    let id = Preconditioner::Identity;
    let part = manual_layers(&p.grid, &[0..1, 1..2, 2..3]).unwrap();
    let pd = pdgmres(&p.matrix, &p.rhs, None, &id, &solve_cfg(20, 300), partition_to_basis(&part, None).unwrap(), ApChoice::A).unwrap();
    let rd = rdgmres(&p.matrix, &p.rhs, None, &id, &solve_cfg(40, 300), 3).unwrap();
    let plain = gmres(&p.matrix, &p.rhs, None, &id, &solve_cfg(20, 300), None).unwrap();
    assert!(pd.converged);
    assert_eq!(pd.deflation_start_cycle, Some(0));
    assert_eq!(pd.deflation_dim, 3);
    assert!(pd.iterations < rd.iterations, "pd {} rd {}", pd.iterations, rd.iterations);
    assert!(pd.iterations < plain.iterations);
    assert!(residual_norm(&p.matrix, &p.rhs, &pd.x) <= 10.0 * 1e-6 * norm(&p.rhs));
}

#[test]
fn two_layer_basis_wins_without_a_bump() {
    let p = bo_problem(100.0, 1.0).unwrap();
    let id = Preconditioner::Identity;
    let part = manual_layers(&p.grid, &BO_LAYERS).unwrap();
    let pd = pdgmres(&p.matrix, &p.rhs, None, &id, &solve_cfg(20, 3000), partition_to_basis(&part, None).unwrap(), ApChoice::A).unwrap();
    let rd = rdgmres(&p.matrix, &p.rhs, None, &id, &solve_cfg(30, 3000), 1).unwrap();
    let plain = gmres(&p.matrix, &p.rhs, None, &id, &solve_cfg(20, 3000), None).unwrap();
    assert!(pd.converged && rd.converged && plain.converged);
    assert!(pd.iterations < rd.iterations && pd.iterations < plain.iterations);
    for w in pd.history.windows(2) {
        assert!(w[1].resnorm <= w[0].resnorm * (1.0 + 1e-10));
    }
}

#[test]
fn sagd_layers_at_least_halve_the_iterations() {
    let p = sagd_problem().unwrap();
    let m = Preconditioner::jacobi(&p.matrix).unwrap();
    let part = manual_layers(&p.grid, &sagd_layer_ranges()).unwrap();
    let rest = part.remainder_label().unwrap();
    let basis = partition_to_basis(&part, Some(&[rest])).unwrap();
    let pd = pdgmres(&p.matrix, &p.rhs, None, &m, &solve_cfg(20, 3000), basis, ApChoice::A).unwrap();
    let plain = gmres(&p.matrix, &p.rhs, None, &m, &solve_cfg(20, 3000), None).unwrap();
    assert!(pd.converged);
    assert!(2 * pd.iterations <= plain.iterations, "pd {} gmres {}", pd.iterations, plain.iterations);
}

#[test]
fn single_all_ones_vector_is_well_posed() {
    let p = sandwich_problem(1e6).unwrap();
    let part = subdomain_partition(&p.grid, 1, 1, 1).unwrap();
    let basis = partition_to_basis(&part, None).unwrap();
    let r = pdgmres(&p.matrix, &p.rhs, None, &Preconditioner::Identity, &solve_cfg(30, 600), basis, ApChoice::A).unwrap();
    assert!(r.converged);
    assert_eq!(r.deflation_dim, 1);
}

#[test]
fn coarse_singularity_propagates() {
    let p = sandwich_problem(1e6).unwrap();
    let n = p.matrix.n();
    let ones = vec![1.0; n];
    let basis = defgmres::deflation::DeflationBasis::from_dense_columns(n, vec![ones.clone(), ones]).unwrap();
    let err = pdgmres(&p.matrix, &p.rhs, None, &Preconditioner::Identity, &solve_cfg(10, 10), basis, ApChoice::A).unwrap_err();
    assert!(matches!(err, defgmres::Error::SingularCoarseMatrix { .. }));
}

/// Layer thicknesses and log-permeabilities on a multiple of 3 decades.
fn layered() -> impl Strategy<Value = Vec<(usize, i32)>> {
    prop::collection::vec((1usize..4, 0i32..3), 1..7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn levelset_recovers_layer_blocks(layers in layered(), nx in 1usize..4, ny in 1usize..4) {
        let nz: usize = layers.iter().map(|l| l.0).sum();
        let grid = Grid::new(nx, ny, nz).unwrap();
        let mut per_z = vec![];
        for &(t, e) in &layers {
            per_z.extend(std::iter::repeat(e).take(t));
        }
        let field = field_from(grid, |_, _, z| 10f64.powi(-3 * per_z[z]));
        let p = levelset_partition(&field, 2.0).unwrap();
        // contiguous runs of equal exponent
        let mut block = vec![0usize; nz];
        for z in 1..nz {
            block[z] = block[z - 1] + usize::from(per_z[z] != per_z[z - 1]);
        }
        prop_assert_eq!(p.d(), block[nz - 1] + 1);
        for i in 0..grid.cells() {
            prop_assert_eq!(p.labels()[i], block[grid.coords(i).2]);
        }
    }

    #[test]
    fn partitions_are_complete_and_orthogonal(nx in 1usize..7, ny in 1usize..7, nz in 1usize..5, seed in 0u64..500) {
        use rand::Rng;
        let grid = Grid::new(nx, ny, nz).unwrap();
        let mut g = rng(seed);
        let k: Vec<f64> = (0..grid.cells()).map(|_| 10f64.powi(-3 * g.gen_range(0..3))).collect();
        let field = PermeabilityField::isotropic(grid, k).unwrap();
        let (px, py, pz) = (g.gen_range(1..=nx), g.gen_range(1..=ny), g.gen_range(1..=nz));
        let parts = [
            subdomain_partition(&grid, px, py, pz).unwrap(),
            levelset_partition(&field, 2.0).unwrap(),
            subdomain_levelset_partition(&field, px, py, pz, 2.0).unwrap(),
        ];
        for p in &parts {
            prop_assert_eq!(p.labels().len(), grid.cells());
            prop_assert!(p.sizes().iter().all(|&s| s >= 1));
            let basis = partition_to_basis(p, None).unwrap();
            let g = ztz(&basis);
            for (i, row) in g.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    prop_assert_eq!(*v, if i == j { p.sizes()[i] as f64 } else { 0.0 });
                }
            }
            let mut sum = vec![0.0; grid.cells()];
            for j in 0..basis.d() {
                for (s, v) in sum.iter_mut().zip(basis.column_dense(j)) {
                    *s += v;
                }
            }
            prop_assert!(sum.iter().all(|&s| s == 1.0));
        }
        // levelset regions are connected and single-band
        let p = &parts[1];
        for l in 0..p.d() {
            let cells: Vec<usize> = (0..grid.cells()).filter(|&i| p.labels()[i] == l).collect();
            let k0 = field.kx()[cells[0]];
            prop_assert!(cells.iter().all(|&i| field.kx()[i] == k0));
            let mut seen = vec![false; grid.cells()];
            let mut stack = vec![cells[0]];
            seen[cells[0]] = true;
            let mut count = 0;
            while let Some(i) = stack.pop() {
                count += 1;
                for (j, _) in grid.neighbors(i) {
                    if !seen[j] && p.labels()[j] == l {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            prop_assert_eq!(count, cells.len());
        }
    }
}
