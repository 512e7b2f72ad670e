//! Wall-clock cost of deflation against the iterations it saves.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::deflation::{build_context, ApChoice, DeflationBasis, DeflationContext};
use crate::error::{Error, Result};
use crate::harmonic::{harmonic_ritz_b, rdgmres};
use crate::io::ms;
use crate::krylov::{gmres, GmresConfig, Preconditioner, SolveReport};
use crate::linalg::SparseMatrix;
use crate::physics::pdgmres;
use crate::testbed::PressureProblem;

/// Shortest span a timed loop must cover.
const MIN_SAMPLE: Duration = Duration::from_millis(2);

/// One linear system with the basis used by physics-based deflation.
#[derive(Debug, Clone)]
pub struct BenchCase {
    pub name: String,
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub precond: Preconditioner,
    pub basis: Option<DeflationBasis>,
    pub assembly_time: Duration,
}

impl BenchCase {
    /// Times `build` as the assembly phase.
    pub fn assemble(
        name: impl Into<String>,
        build: impl FnOnce() -> Result<PressureProblem>,
        precond_jacobi: bool,
        basis: impl FnOnce(&PressureProblem) -> Result<Option<DeflationBasis>>,
    ) -> Result<Self> {
        let t = Instant::now();
        let p = build()?;
        let assembly_time = t.elapsed();
        let precond = if precond_jacobi {
            Preconditioner::jacobi(&p.matrix)?
        } else {
            Preconditioner::Identity
        };
        let basis = basis(&p)?;
        Ok(BenchCase {
            name: name.into(),
            matrix: p.matrix,
            rhs: p.rhs,
            precond,
            basis,
            assembly_time,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMethod {
    Gmres { m: usize },
    Rdgmres { m: usize, d: usize },
    /// Uses the case's basis.
    Pdgmres { m: usize },
}

impl BenchMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BenchMethod::Gmres { .. } => "gmres",
            BenchMethod::Rdgmres { .. } => "rdgmres",
            BenchMethod::Pdgmres { .. } => "pdgmres",
        }
    }

    pub fn m(&self) -> usize {
        match *self {
            BenchMethod::Gmres { m } | BenchMethod::Rdgmres { m, .. } | BenchMethod::Pdgmres { m } => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub problem: String,
    pub method: &'static str,
    pub m: usize,
    pub d: usize,
    pub iters: usize,
    pub converged: bool,
    pub assembly_ms: f64,
    /// Median coarse-system build time.
    pub setup_ms: f64,
    /// Median total solve time, setup included.
    pub solve_ms: f64,
    /// Median of `|t - median| / median` over the solve repeats.
    pub solve_dispersion: f64,
    /// Time of one `P1` application over one sparse product; 0 without
    /// deflation.
    pub p1_cost_spmv: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostReport {
    pub rows: Vec<CostRow>,
}

impl CostReport {
    /// `problem,method,m,d,iters,setup_ms,solve_ms,p1_cost_spmv`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("problem,method,m,d,iters,setup_ms,solve_ms,p1_cost_spmv\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:?},{:?},{:?}",
                r.problem, r.method, r.m, r.d, r.iters, r.setup_ms, r.solve_ms, r.p1_cost_spmv
            );
        }
        s
    }

    pub fn row(&self, problem: &str, method: &str) -> Option<&CostRow> {
        self.rows.iter().find(|r| r.problem == problem && r.method == method)
    }
}

pub fn median(v: &mut [f64]) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

fn dispersion(v: &[f64]) -> f64 {
    let med = median(&mut v.to_vec());
    if med == 0.0 {
        return 0.0;
    }
    let mut dev: Vec<f64> = v.iter().map(|t| (t - med).abs() / med).collect();
    median(&mut dev)
}

/// Seconds per call of `f`, from a loop long enough to beat timer noise.
pub fn time_per_call(mut f: impl FnMut()) -> f64 {
    let mut count = 1usize;
    loop {
        let t = Instant::now();
        for _ in 0..count {
            f();
        }
        let el = t.elapsed();
        if el >= MIN_SAMPLE || count >= 1 << 24 {
            return el.as_secs_f64() / count as f64;
        }
        count *= 2;
    }
}

/// Median over `repeats` of the time of one `P1` application divided by the
/// time of one product with `A`.
pub fn p1_cost_in_spmv(ctx: &DeflationContext<'_>, repeats: usize) -> f64 {
    let a = ctx.matrix();
    let n = a.n();
    let x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
    let mut y = vec![0.0; n];
    let mut v = x.clone();
    let mut ratios = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let spmv = time_per_call(|| a.spmv_into(std::hint::black_box(&x), &mut y));
        let p1 = time_per_call(|| {
            v.copy_from_slice(&x);
            ctx.apply_p1_in_place(std::hint::black_box(&mut v));
        });
        let copy = time_per_call(|| v.copy_from_slice(std::hint::black_box(&x)));
        ratios.push((p1 - copy).max(0.0) / spmv);
    }
    median(&mut ratios)
}

fn run_method(case: &BenchCase, method: BenchMethod, cfg: &GmresConfig) -> Result<SolveReport> {
    let cfg = GmresConfig {
        restart: method.m(),
        ..cfg.clone()
    };
    match method {
        BenchMethod::Gmres { .. } => gmres(&case.matrix, &case.rhs, None, &case.precond, &cfg, None),
        BenchMethod::Rdgmres { d, .. } => rdgmres(&case.matrix, &case.rhs, None, &case.precond, &cfg, d),
        BenchMethod::Pdgmres { .. } => {
            let basis = case
                .basis
                .clone()
                .ok_or_else(|| Error::invalid(format!("case {} has no deflation basis", case.name)))?;
            pdgmres(&case.matrix, &case.rhs, None, &case.precond, &cfg, basis, ApChoice::A)
        }
    }
}

/// Context matching what `method` deflates with, for the `P1` cost probe.
fn probe_context<'a>(case: &'a BenchCase, method: BenchMethod, cfg: &GmresConfig) -> Result<Option<DeflationContext<'a>>> {
    match method {
        BenchMethod::Gmres { .. } => Ok(None),
        BenchMethod::Pdgmres { .. } => {
            let basis = case.basis.clone().expect("checked by run_method");
            build_context(&case.matrix, &case.precond, basis, &case.rhs, ApChoice::A).map(Some)
        }
        BenchMethod::Rdgmres { m, d } => {
            let cfg = GmresConfig {
                restart: m,
                max_iters: m,
                min_iters: m,
                capture_arnoldi: true,
                ..cfg.clone()
            };
            let r = gmres(&case.matrix, &case.rhs, None, &case.precond, &cfg, None)?;
            let Some(data) = r.arnoldi.first().filter(|d| d.steps == m && !d.broke_down()) else {
                return Ok(None);
            };
            let set = harmonic_ritz_b(data, d)?;
            let basis = DeflationBasis::from_dense_columns(case.matrix.n(), set.z)?;
            build_context(&case.matrix, &case.precond, basis, &case.rhs, ApChoice::A).map(Some)
        }
    }
}

/// Runs every method on every case `repeats` times after one discarded
/// warm-up and reports medians.
pub fn overhead_suite(
    cases: &[BenchCase],
    methods: &[BenchMethod],
    repeats: usize,
    cfg: &GmresConfig,
) -> Result<CostReport> {
    if repeats < 3 {
        return Err(Error::invalid(format!("need at least 3 repeats, got {repeats}")));
    }
    let mut report = CostReport::default();
    for case in cases {
        for &method in methods {
            let warm = run_method(case, method, cfg)?;
            let mut solve = Vec::with_capacity(repeats);
            let mut setup = Vec::with_capacity(repeats);
            for _ in 0..repeats {
                let r = run_method(case, method, cfg)?;
                solve.push(ms(r.solve_time));
                setup.push(ms(r.setup_time));
            }
            let p1_cost_spmv = match probe_context(case, method, cfg)? {
                Some(ctx) => p1_cost_in_spmv(&ctx, repeats),
                None => 0.0,
            };
            report.rows.push(CostRow {
                problem: case.name.clone(),
                method: method.name(),
                m: method.m(),
                d: warm.deflation_dim,
                iters: warm.iterations,
                converged: warm.converged,
                assembly_ms: ms(case.assembly_time),
                setup_ms: median(&mut setup),
                solve_ms: median(&mut solve.clone()),
                solve_dispersion: dispersion(&solve),
                p1_cost_spmv,
            });
        }
    }
    Ok(report)
}
