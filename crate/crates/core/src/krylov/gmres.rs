use std::time::{Duration, Instant};

use crate::deflation::{build_context, ApChoice, DeflationBasis, DeflationContext};
use crate::error::{check_len, Error, Result};
use crate::harmonic::harmonic_ritz_b;
use crate::krylov::arnoldi::{givens, hessenberg_ritz};
use crate::krylov::{
    ArnoldiData, CycleSummary, GmresConfig, IterationRecord, Preconditioner, RitzSnapshot, RitzTrace, SolveReport,
    SolveStatus,
};
use crate::linalg::{axpy, dot, norm2, DenseMatrix, SparseMatrix};

/// Loss-of-orthogonality level that triggers a second Gram-Schmidt pass.
const REORTH_TOL: f64 = 1e-8;
/// `h_{j+1,j}` below this fraction of `||A v_j||` counts as breakdown.
const BREAKDOWN_TOL: f64 = 1e-14;
/// Slack on the explicit residual when the least-squares estimate converged.
const EXPLICIT_SLACK: f64 = 10.0;

/// Where deflation vectors come from.
pub(crate) enum DeflationSource<'c, 'a> {
    None,
    Fixed(&'c DeflationContext<'a>),
    /// Harmonic Ritz vectors of the first completed cycle, frozen afterwards.
    Harmonic { d: usize },
}

/// Restarted GMRES(m) with right preconditioning `A M^-1 u = b, x = M^-1 u`.
///
/// With a deflation context the cycles run on `P1 A M^-1` and the returned
/// solution is reconstructed from the deflated iterate.
pub fn gmres(
    a: &SparseMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    precond: &Preconditioner,
    cfg: &GmresConfig,
    deflation: Option<&DeflationContext<'_>>,
) -> Result<SolveReport> {
    let source = match deflation {
        Some(ctx) => DeflationSource::Fixed(ctx),
        None => DeflationSource::None,
    };
    run(a, b, x0, precond, cfg, source)
}

struct CycleOut {
    data: ArnoldiData,
    y: Vec<f64>,
    estimate: f64,
    breakdown: bool,
}

pub(crate) fn run(
    a: &SparseMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    precond: &Preconditioner,
    cfg: &GmresConfig,
    source: DeflationSource<'_, '_>,
) -> Result<SolveReport> {
    let start = Instant::now();
    let n = a.n();
    check_len(n, b.len())?;
    if let Some(x0) = x0 {
        check_len(n, x0.len())?;
    }
    if let Some(pn) = precond.dim() {
        check_len(n, pn)?;
    }
    if cfg.restart == 0 {
        return Err(Error::invalid("cycle length must be at least 1"));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if let DeflationSource::Fixed(ctx) = &source {
        check_len(n, ctx.n())?;
    }
    if let DeflationSource::Harmonic { d } = source {
        if d == 0 || d > cfg.restart {
            return Err(Error::invalid(format!("need 1 <= d <= m, got d = {d}, m = {}", cfg.restart)));
        }
    }

    let mut x_hat = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = residual(a, b, &x_hat);
    let initial_residual = norm2(&r);

    let fixed = match &source {
        DeflationSource::Fixed(ctx) => Some(*ctx),
        _ => None,
    };
    let harmonic_d = match source {
        DeflationSource::Harmonic { d } => Some(d),
        _ => None,
    };
    let mut owned: Option<DeflationContext<'_>> = None;
    let mut harmonic_done = false;
    let mut warning = None;
    let mut setup_time = Duration::ZERO;

    let target = cfg.tol * initial_residual;
    let mut report = SolveReport {
        x: vec![],
        iterations: 0,
        restarts: 0,
        converged: false,
        status: SolveStatus::MaxIterations,
        history: vec![],
        initial_residual,
        final_relres: 0.0,
        cycles: vec![],
        ritz_trace: vec![],
        arnoldi: vec![],
        deflation_dim: 0,
        deflation_start_cycle: None,
        warning: None,
        setup_time: Duration::ZERO,
        solve_time: Duration::ZERO,
    };

    if let Some(ctx) = fixed {
        ctx.apply_p1_in_place(&mut r);
        report.deflation_start_cycle = Some(0);
    }
    let mut beta = norm2(&r);
    report.history.push(IterationRecord {
        resnorm: beta,
        cycle: 0,
        deflated: fixed.is_some(),
    });

    let mut iters = 0usize;
    let mut cycle = 0usize;
    let status;
    loop {
        let ctx = fixed.or(owned.as_ref());
        if initial_residual == 0.0 || (beta <= target && iters >= cfg.min_iters) {
            status = SolveStatus::Converged;
            break;
        }
        if iters >= cfg.max_iters {
            status = SolveStatus::MaxIterations;
            break;
        }
        let m = cfg.restart.min(cfg.max_iters - iters);
        let out = arnoldi_cycle(a, precond, ctx, &r, beta, m, iters, cycle, target, cfg, &mut report)?;
        let steps = out.data.steps;
        iters += steps;

        // x_hat += M^-1 V_k y
        let mut dx = out.data.combine(&out.y);
        precond.apply_in_place(&mut dx);
        axpy(1.0, &dx, &mut x_hat);

        r = residual(a, b, &x_hat);
        if let Some(c) = ctx {
            c.apply_p1_in_place(&mut r);
        }
        beta = norm2(&r);
        report.cycles.push(CycleSummary {
            start_iter: iters - steps,
            steps,
            estimate: out.estimate,
            explicit: beta,
            deflated: ctx.is_some(),
            context_digest: ctx.map(DeflationContext::digest),
        });

        let estimate_done = out.estimate <= target && iters >= cfg.min_iters;
        let finished = if (estimate_done || out.breakdown) && beta <= EXPLICIT_SLACK * target {
            Some(SolveStatus::Converged)
        } else if out.breakdown && out.estimate > target {
            Some(SolveStatus::Breakdown)
        } else {
            None
        };

        if let (None, Some(d), false) = (finished, harmonic_d, harmonic_done) {
            if steps == cfg.restart && !out.breakdown {
                harmonic_done = true;
                let t = Instant::now();
                match harmonic_context(a, precond, b, &out.data, d) {
                    Ok(c) => {
                        r = residual(a, b, &x_hat);
                        c.apply_p1_in_place(&mut r);
                        beta = norm2(&r);
                        report.deflation_start_cycle = Some(cycle + 1);
                        owned = Some(c);
                    }
                    Err(e) => warning = Some(format!("deflation disabled, continuing undeflated: {e}")),
                }
                setup_time += t.elapsed();
            }
        }
        if cfg.capture_arnoldi {
            report.arnoldi.push(out.data);
        }
        if let Some(s) = finished {
            status = s;
            break;
        }
        cycle += 1;
    }

    let ctx = fixed.or(owned.as_ref());
    let x = match ctx {
        Some(c) => c.reconstruct(&x_hat)?,
        None => x_hat,
    };
    let true_res = norm2(&residual(a, b, &x));
    report.final_relres = if initial_residual > 0.0 { true_res / initial_residual } else { 0.0 };
    report.x = x;
    report.iterations = iters;
    report.restarts = report.cycles.len().saturating_sub(1);
    report.converged = status == SolveStatus::Converged;
    report.status = status;
    report.deflation_dim = ctx.map_or(0, DeflationContext::d);
    report.warning = warning;
    report.setup_time = setup_time;
    report.solve_time = start.elapsed();
    Ok(report)
}

fn harmonic_context<'a>(
    a: &'a SparseMatrix,
    precond: &'a Preconditioner,
    b: &[f64],
    data: &ArnoldiData,
    d: usize,
) -> Result<DeflationContext<'a>> {
    let set = harmonic_ritz_b(data, d)?;
    let basis = DeflationBasis::from_dense_columns(a.n(), set.z)?;
    build_context(a, precond, basis, b, ApChoice::A)
}

fn residual(a: &SparseMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; b.len()];
    a.spmv_into(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    r
}

/// One Arnoldi cycle of at most `m` steps starting from residual `r0`.
#[allow(clippy::too_many_arguments)]
fn arnoldi_cycle(
    a: &SparseMatrix,
    precond: &Preconditioner,
    ctx: Option<&DeflationContext<'_>>,
    r0: &[f64],
    beta: f64,
    m: usize,
    iters_before: usize,
    cycle: usize,
    target: f64,
    cfg: &GmresConfig,
    report: &mut SolveReport,
) -> Result<CycleOut> {
    let n = r0.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    basis.push(r0.iter().map(|v| v / beta).collect());
    let mut hbar = DenseMatrix::zeros(m + 1, m);
    let mut rmat = DenseMatrix::zeros(m + 1, m);
    let mut rotations: Vec<(f64, f64)> = Vec::with_capacity(m);
    let mut g = vec![0.0; m + 1];
    g[0] = beta;
    let mut tmp = vec![0.0; n];
    let mut steps = 0;
    let mut breakdown = false;

    for j in 0..m {
        // w = P1 A M^-1 v_j
        tmp.copy_from_slice(&basis[j]);
        precond.apply_in_place(&mut tmp);
        let mut w = vec![0.0; n];
        a.spmv_into(&tmp, &mut w);
        if let Some(c) = ctx {
            c.apply_p1_in_place(&mut w);
        }
        let w_norm0 = norm2(&w);

        for (i, v) in basis.iter().enumerate() {
            let h = dot(&w, v);
            hbar[(i, j)] = h;
            axpy(-h, v, &mut w);
        }
        let mut hn = norm2(&w);
        if hn > 0.0 {
            let worst = basis.iter().map(|v| dot(&w, v).abs()).fold(0.0, f64::max);
            if worst > REORTH_TOL * hn {
                for (i, v) in basis.iter().enumerate() {
                    let h = dot(&w, v);
                    hbar[(i, j)] += h;
                    axpy(-h, v, &mut w);
                }
                hn = norm2(&w);
            }
        }
        hbar[(j + 1, j)] = hn;

        for i in 0..=j + 1 {
            rmat[(i, j)] = hbar[(i, j)];
        }
        for (i, &(c, s)) in rotations.iter().enumerate() {
            super::arnoldi::rotate_rows(&mut rmat, i, j, c, s);
        }
        let (c, s) = givens(rmat[(j, j)], rmat[(j + 1, j)]);
        super::arnoldi::rotate_rows(&mut rmat, j, j, c, s);
        rotations.push((c, s));
        g[j + 1] = -s * g[j];
        g[j] *= c;

        steps = j + 1;
        let iteration = iters_before + steps;
        let estimate = g[j + 1].abs();
        report.history.push(IterationRecord {
            resnorm: estimate,
            cycle,
            deflated: ctx.is_some(),
        });
        if cfg.ritz_trace == RitzTrace::EveryIteration {
            report.ritz_trace.push(RitzSnapshot {
                cycle,
                iteration,
                values: hessenberg_ritz(&hbar, steps)?,
            });
        }

        breakdown = hn <= BREAKDOWN_TOL * w_norm0 || hn == 0.0;
        if !breakdown {
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        if breakdown || (estimate <= target && iteration >= cfg.min_iters) {
            break;
        }
    }

    if cfg.ritz_trace == RitzTrace::CycleEnd {
        report.ritz_trace.push(RitzSnapshot {
            cycle,
            iteration: iters_before + steps,
            values: hessenberg_ritz(&hbar, steps)?,
        });
    }

    // back substitution R y = g
    let mut y = vec![0.0; steps];
    for i in (0..steps).rev() {
        let mut s = g[i];
        for k in i + 1..steps {
            s -= rmat[(i, k)] * y[k];
        }
        y[i] = if rmat[(i, i)] != 0.0 { s / rmat[(i, i)] } else { 0.0 };
    }

    let estimate = g[steps].abs();
    let hbar = hbar.submatrix(steps + 1, steps);
    rotations.truncate(steps);
    Ok(CycleOut {
        data: ArnoldiData {
            basis,
            hbar,
            rotations,
            steps,
        },
        y,
        estimate,
        breakdown,
    })
}
