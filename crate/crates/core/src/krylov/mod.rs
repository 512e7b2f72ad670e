//! Restarted, right-preconditioned GMRES with optional deflation.

mod arnoldi;
mod gmres;
mod precond;

use std::time::Duration;

use num_complex::Complex64;

pub use arnoldi::{ritz_values, sort_by_magnitude, ArnoldiData};
pub(crate) use arnoldi::compare_magnitude;
pub use gmres::gmres;
pub(crate) use gmres::{run, DeflationSource};
pub use precond::Preconditioner;

/// When to record Ritz values of the current Hessenberg matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RitzTrace {
    #[default]
    Off,
    CycleEnd,
    EveryIteration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresConfig {
    /// Cycle length `m`.
    pub restart: usize,
    /// Target for `||b - A x|| / ||b - A x0||`.
    pub tol: f64,
    pub max_iters: usize,
    /// No convergence exit before this many iterations.
    pub min_iters: usize,
    pub ritz_trace: RitzTrace,
    /// Keep the Arnoldi data of every cycle in the report.
    pub capture_arnoldi: bool,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig {
            restart: 30,
            tol: 1e-6,
            max_iters: 1000,
            min_iters: 0,
            ritz_trace: RitzTrace::Off,
            capture_arnoldi: false,
        }
    }
}

impl GmresConfig {
    pub fn with_restart(restart: usize) -> Self {
        GmresConfig {
            restart,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// The Krylov space became invariant without reaching the tolerance.
    Breakdown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub resnorm: f64,
    pub cycle: usize,
    pub deflated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleSummary {
    pub start_iter: usize,
    pub steps: usize,
    /// Least-squares residual at the end of the cycle.
    pub estimate: f64,
    /// Residual recomputed from the updated iterate.
    pub explicit: f64,
    pub deflated: bool,
    pub context_digest: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RitzSnapshot {
    pub cycle: usize,
    /// Global iteration count when the snapshot was taken.
    pub iteration: usize,
    /// Ascending by magnitude.
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    pub status: SolveStatus,
    /// Initial residual followed by one entry per iteration.
    pub history: Vec<IterationRecord>,
    /// `||b - A x0||`, the reference for the relative tolerance.
    pub initial_residual: f64,
    /// `||b - A x|| / ||b - A x0||` of the returned solution.
    pub final_relres: f64,
    pub cycles: Vec<CycleSummary>,
    pub ritz_trace: Vec<RitzSnapshot>,
    pub arnoldi: Vec<ArnoldiData>,
    /// Number of deflation vectors in use at the end of the solve.
    pub deflation_dim: usize,
    /// First cycle that ran deflated.
    pub deflation_start_cycle: Option<usize>,
    pub warning: Option<String>,
    pub setup_time: Duration,
    pub solve_time: Duration,
}

impl SolveReport {
    pub fn residual_history(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.resnorm).collect()
    }

    pub fn relative_history(&self) -> Vec<f64> {
        let r0 = self.initial_residual;
        self.history
            .iter()
            .map(|r| if r0 > 0.0 { r.resnorm / r0 } else { 0.0 })
            .collect()
    }
}
