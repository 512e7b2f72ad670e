//! Command-line experiment driver.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bench::{overhead_suite, BenchCase, BenchMethod};
use crate::deflation::DeflationBasis;
use crate::error::{Error, Result};
use crate::harmonic::rdgmres;
use crate::io;
use crate::krylov::{gmres, GmresConfig, Preconditioner, RitzTrace, SolveReport};
use crate::linalg::SparseMatrix;
use crate::physics::{
    levelset_partition, manual_layers, partition_to_basis, pdgmres, read_partition, subdomain_levelset_partition,
    subdomain_partition, write_partition, Partition,
};
use crate::spectral::spectrum;
use crate::testbed::cases;
use crate::testbed::{
    assemble_pressure, diagonal_scale, load_field_file, make_layered_field, point_sources, BoundarySpec, Grid,
    PermeabilityField, PressureProblem,
};

pub use config::{ExperimentConfig, Method};
use config::{InitialGuess, PartitionSpec, PrecondKind, ProblemKind, SourceSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;
pub const EXIT_SINGULAR: i32 = 5;
pub const EXIT_EIG: i32 = 6;

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Format { .. } => EXIT_IO,
        Error::Config { .. } | Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::SizeLimit { .. } => {
            EXIT_CONFIG
        }
        Error::SingularCoarseMatrix { .. } | Error::SingularProblem(_) => EXIT_SINGULAR,
        Error::EigNonConvergence { .. } | Error::HarmonicRitzFailure(_) => EXIT_EIG,
    }
}

#[derive(Debug, Parser)]
#[command(name = "defgmres", version, about = "Deflated restarted GMRES experiments on layered pressure problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assemble the configured problem and write it as Matrix Market + vector.
    Generate {
        config: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        rhs: PathBuf,
    },
    /// Run the configured method.
    Solve { config: PathBuf },
    /// Run every method in `methods` on the same problem.
    Compare { config: PathBuf },
    /// Dense spectrum of the system matrix.
    Spectrum { config: PathBuf },
    /// Plain GMRES recording Ritz values.
    RitzTrace { config: PathBuf },
    /// Timing of the configured methods.
    Bench { config: PathBuf },
}

/// Parses `args` (program name first), runs the command and returns the exit
/// status. Messages go to `out` and `err`.
pub fn run_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Generate { config, matrix, rhs } => {
            let cfg = ExperimentConfig::load(&config)?;
            let built = build_problem(&cfg)?;
            io::write_matrix_market(&matrix, &built.matrix)?;
            io::write_vector(&rhs, &built.rhs)?;
            write_out(out, &format!("{} {}", built.matrix.n(), built.matrix.nnz()))?;
            Ok(EXIT_OK)
        }
        Command::Solve { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let built = build_problem(&cfg)?;
            let run = solve_method(&cfg, &built, cfg.solver.method)?;
            write_artifacts(&cfg, &built, &run)?;
            write_out(out, io::SUMMARY_HEADER)?;
            write_out(out, &run.summary)?;
            Ok(if run.report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::Compare { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let built = build_problem(&cfg)?;
            let stem = cfg
                .output
                .output_stem
                .clone()
                .ok_or_else(|| Error::Config {
                    line: 0,
                    msg: "compare needs `output_stem`".into(),
                })?;
            write_out(out, io::SUMMARY_HEADER)?;
            let mut all = true;
            for &meth in &cfg.methods {
                let run = solve_method(&cfg, &built, meth)?;
                let path = stem_path(&stem, meth.name());
                io::write_text(&path, &io::convergence_csv(&run.report))?;
                write_out(out, &run.summary)?;
                all &= run.report.converged;
            }
            if let (Some(p), Some(part)) = (&cfg.output.partition_file, &built_partition(&cfg, &built)?) {
                write_partition(p, part)?;
            }
            Ok(if all { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::Spectrum { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let built = build_problem(&cfg)?;
            let rep = spectrum(&built.matrix, cfg.spectrum_cutoff)?;
            let csv = rep.to_csv();
            match &cfg.output.spectrum_csv {
                Some(p) => {
                    io::write_text(p, &csv)?;
                    let gap = rep.gap_ratio.map_or_else(|| "none".to_string(), |g| format!("{g:?}"));
                    write_out(out, "n,n_small,cutoff,gap_ratio")?;
                    write_out(out, &format!("{},{},{:?},{gap}", rep.eigenvalues.len(), rep.n_small, rep.cutoff))?;
                }
                None => write!(out, "{csv}").map_err(stdout_err)?,
            }
            Ok(EXIT_OK)
        }
        Command::RitzTrace { config } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if cfg.solver.ritz_trace == RitzTrace::Off {
                cfg.solver.ritz_trace = RitzTrace::EveryIteration;
            }
            let built = build_problem(&cfg)?;
            let run = solve_method(&cfg, &built, Method::Gmres)?;
            let csv = io::ritz_csv(&run.report);
            match &cfg.output.ritz_csv {
                Some(p) => {
                    io::write_text(p, &csv)?;
                    write_out(out, io::SUMMARY_HEADER)?;
                    write_out(out, &run.summary)?;
                }
                None => write!(out, "{csv}").map_err(stdout_err)?,
            }
            if let Some(p) = &cfg.output.convergence_csv {
                io::write_text(p, &io::convergence_csv(&run.report))?;
            }
            Ok(EXIT_OK)
        }
        Command::Bench { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let built = build_problem(&cfg)?;
            let basis = match built_partition(&cfg, &built)? {
                Some(p) => Some(basis_for(&cfg, &p)?),
                None => None,
            };
            let case = BenchCase {
                name: problem_name(&cfg),
                precond: precond_for(&cfg, &built.matrix)?,
                matrix: built.matrix,
                rhs: built.rhs,
                basis,
                assembly_time: built.assembly_time,
            };
            let methods: Vec<BenchMethod> = cfg
                .methods
                .iter()
                .map(|&meth| {
                    let p = cfg.solver.params(meth);
                    match meth {
                        Method::Gmres => BenchMethod::Gmres { m: p.m },
                        Method::Rdgmres => BenchMethod::Rdgmres {
                            m: p.m,
                            d: p.d.unwrap_or(1),
                        },
                        Method::Pdgmres => BenchMethod::Pdgmres { m: p.m },
                    }
                })
                .collect();
            let report = overhead_suite(&[case], &methods, cfg.bench_repeats, &gmres_config(&cfg, 1))?;
            let csv = report.to_csv();
            match &cfg.output.bench_csv {
                Some(p) => io::write_text(p, &csv)?,
                None => write!(out, "{csv}").map_err(stdout_err)?,
            }
            Ok(EXIT_OK)
        }
    }
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn write_out(out: &mut dyn Write, line: &str) -> Result<()> {
    writeln!(out, "{line}").map_err(stdout_err)
}

fn stem_path(stem: &Path, method: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(format!(".{method}.csv"));
    PathBuf::from(s)
}

fn problem_name(cfg: &ExperimentConfig) -> String {
    match &cfg.problem.kind {
        ProblemKind::Sandwich { .. } => "sandwich",
        ProblemKind::Alternating { .. } => "alternating",
        ProblemKind::Bo { .. } => "bo",
        ProblemKind::Sagd => "sagd",
        ProblemKind::Homogeneous { .. } => "homogeneous",
        ProblemKind::Layered { .. } => "layered",
        ProblemKind::FieldFile { .. } => "field",
        ProblemKind::Files { .. } => "files",
    }
    .to_string()
}

/// Assembled system plus what partitioning needs.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub grid: Option<Grid>,
    pub field: Option<PermeabilityField>,
    pub assembly_time: std::time::Duration,
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<BuiltProblem> {
    let t = std::time::Instant::now();
    let spec = &cfg.problem;
    let grid_of = |g: [usize; 3]| match spec.spacing {
        Some([dx, dy, dz]) => Grid::with_spacing(g[0], g[1], g[2], dx, dy, dz),
        None => Grid::new(g[0], g[1], g[2]),
    };
    // (field, default scaling, default sources)
    let (field, scale, sources) = match &spec.kind {
        ProblemKind::Files { matrix, rhs } => {
            let a = io::read_matrix_market(matrix)?;
            let b = io::read_vector(rhs)?;
            crate::error::check_len(a.n(), b.len())?;
            let grid = spec.grid.map(grid_of).transpose()?;
            if let Some(g) = &grid {
                crate::error::check_len(g.cells(), a.n())?;
            }
            let field = match (&spec.field_file, &grid) {
                (Some(p), Some(g)) => Some(load_field_file(p, *g)?),
                (Some(_), None) => return Err(Error::Config { line: 0, msg: "field_file needs `grid`".into() }),
                _ => None,
            };
            return Ok(BuiltProblem {
                matrix: a,
                rhs: b,
                grid,
                field,
                assembly_time: t.elapsed(),
            });
        }
        ProblemKind::Sandwich { sigma } => (cases::sandwich_field(*sigma)?, true, SourceSpec::Corner),
        ProblemKind::Alternating { layers, eps } => (cases::alternating_field(*layers, *eps)?, true, SourceSpec::Corner),
        ProblemKind::Bo { top, bottom } => (cases::bo_field(*top, *bottom)?, true, SourceSpec::Bo),
        ProblemKind::Sagd => (cases::sagd_field()?, false, SourceSpec::Sagd),
        ProblemKind::Homogeneous { k } => {
            let g = grid_of(spec.grid.expect("validated"))?;
            (PermeabilityField::homogeneous(g, *k)?, true, SourceSpec::Corner)
        }
        ProblemKind::Layered { layers } => {
            let g = grid_of(spec.grid.expect("validated"))?;
            (make_layered_field(g, layers)?, true, SourceSpec::Corner)
        }
        ProblemKind::FieldFile { path } => {
            let g = grid_of(spec.grid.expect("validated"))?;
            (load_field_file(path, g)?, true, SourceSpec::Corner)
        }
    };
    let grid = *field.grid();
    let q = match spec.sources.as_ref().unwrap_or(&sources) {
        SourceSpec::Corner => cases::corner_sources(&grid),
        SourceSpec::Bo => point_sources(&grid, &cases::bo_wells())?,
        SourceSpec::Sagd => point_sources(&grid, &cases::sagd_wells())?,
        SourceSpec::Wells(w) => point_sources(&grid, w)?,
    };
    let bc = spec.bc.unwrap_or(BoundarySpec::TopDirichlet);
    let mut p: PressureProblem = assemble_pressure(&field, bc, &q)?;
    if spec.scaling.unwrap_or(scale) {
        p = diagonal_scale(&p)?;
    }
    Ok(BuiltProblem {
        matrix: p.matrix,
        rhs: p.rhs,
        grid: Some(grid),
        field: Some(field),
        assembly_time: t.elapsed(),
    })
}

fn built_partition(cfg: &ExperimentConfig, built: &BuiltProblem) -> Result<Option<Partition>> {
    let Some(spec) = &cfg.deflation else { return Ok(None) };
    let no_grid = || Error::Config {
        line: 0,
        msg: "partitioning needs a grid (`grid = nx, ny, nz`)".into(),
    };
    let no_field = || Error::Config {
        line: 0,
        msg: "levelset partitioning needs permeabilities (`field_file`)".into(),
    };
    let grid = built.grid.as_ref().ok_or_else(no_grid)?;
    let p = match &spec.partition {
        PartitionSpec::Subdomain { boxes } => subdomain_partition(grid, boxes[0], boxes[1], boxes[2])?,
        PartitionSpec::Levelset { threshold } => levelset_partition(built.field.as_ref().ok_or_else(no_field)?, *threshold)?,
        PartitionSpec::SubdomainLevelset { boxes, threshold } => subdomain_levelset_partition(
            built.field.as_ref().ok_or_else(no_field)?,
            boxes[0],
            boxes[1],
            boxes[2],
            *threshold,
        )?,
        PartitionSpec::Manual { z_ranges } => manual_layers(grid, z_ranges)?,
        PartitionSpec::File { path } => read_partition(path, grid)?,
    };
    Ok(Some(p))
}

fn basis_for(cfg: &ExperimentConfig, p: &Partition) -> Result<DeflationBasis> {
    let include = cfg.deflation.as_ref().is_some_and(|d| d.include_remainder);
    let mut exclude: Vec<usize> = p.inactive_labels().to_vec();
    if let (Some(r), false) = (p.remainder_label(), include) {
        exclude.push(r);
    }
    partition_to_basis(p, Some(&exclude))
}

fn precond_for(cfg: &ExperimentConfig, a: &SparseMatrix) -> Result<Preconditioner> {
    match cfg.solver.precond {
        PrecondKind::Identity => Ok(Preconditioner::Identity),
        PrecondKind::Jacobi => Preconditioner::jacobi(a),
    }
}

fn gmres_config(cfg: &ExperimentConfig, m: usize) -> GmresConfig {
    GmresConfig {
        restart: m,
        tol: cfg.solver.tol,
        max_iters: cfg.solver.max_iters,
        min_iters: cfg.solver.min_iters,
        ritz_trace: cfg.solver.ritz_trace,
        capture_arnoldi: false,
    }
}

fn initial_guess(cfg: &ExperimentConfig, n: usize) -> Option<Vec<f64>> {
    match cfg.solver.x0 {
        InitialGuess::Zero => None,
        InitialGuess::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            Some((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        }
    }
}

/// Result of one method run.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub report: SolveReport,
    pub partition: Option<Partition>,
    pub summary: String,
}

pub fn solve_method(cfg: &ExperimentConfig, built: &BuiltProblem, method: Method) -> Result<MethodRun> {
    let params = cfg.solver.params(method);
    let gcfg = gmres_config(cfg, params.m);
    let precond = precond_for(cfg, &built.matrix)?;
    let x0 = initial_guess(cfg, built.matrix.n());
    let (a, b) = (&built.matrix, &built.rhs);
    let mut partition = None;
    let (report, d) = match method {
        Method::Gmres => (gmres(a, b, x0.as_deref(), &precond, &gcfg, None)?, 0),
        Method::Rdgmres => {
            let d = params.d.unwrap_or(1);
            (rdgmres(a, b, x0.as_deref(), &precond, &gcfg, d)?, d)
        }
        Method::Pdgmres => {
            let p = built_partition(cfg, built)?.ok_or_else(|| Error::Config {
                line: 0,
                msg: "pdgmres needs a deflation spec".into(),
            })?;
            let basis = basis_for(cfg, &p)?;
            let d = basis.d();
            partition = Some(p);
            (pdgmres(a, b, x0.as_deref(), &precond, &gcfg, basis, cfg.solver.ap)?, d)
        }
    };
    let summary = io::summary_line(method.name(), params.m, d, &report);
    Ok(MethodRun {
        method,
        report,
        partition,
        summary,
    })
}

fn write_artifacts(cfg: &ExperimentConfig, built: &BuiltProblem, run: &MethodRun) -> Result<()> {
    let o = &cfg.output;
    if let Some(p) = &o.convergence_csv {
        io::write_text(p, &io::convergence_csv(&run.report))?;
    }
    if let Some(p) = &o.ritz_csv {
        io::write_text(p, &io::ritz_csv(&run.report))?;
    }
    if let Some(p) = &o.spectrum_csv {
        io::write_text(p, &spectrum(&built.matrix, cfg.spectrum_cutoff)?.to_csv())?;
    }
    if let Some(p) = &o.partition_file {
        let part = match &run.partition {
            Some(part) => Some(part.clone()),
            None => built_partition(cfg, built)?,
        };
        if let Some(part) = part {
            write_partition(p, &part)?;
        }
    }
    Ok(())
}

/// Entry point of the binary.
pub fn main_exit_code() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_args(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
