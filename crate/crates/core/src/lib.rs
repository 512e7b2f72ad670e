//! Restarted GMRES with deflation for layered pressure problems.
//!
//! ```
//! use defgmres::deflation::ApChoice;
//! use defgmres::krylov::{GmresConfig, Preconditioner};
//! use defgmres::physics::{levelset_partition, partition_to_basis, pdgmres};
//! use defgmres::testbed::cases::{sandwich_field, sandwich_problem};
//!
//! let p = sandwich_problem(1e6)?;
//! let part = levelset_partition(&sandwich_field(1e6)?, 2.0)?;
//! let basis = partition_to_basis(&part, None)?;
//! let cfg = GmresConfig { max_iters: 300, ..GmresConfig::with_restart(20) };
//! let report = pdgmres(&p.matrix, &p.rhs, None, &Preconditioner::Identity, &cfg, basis, ApChoice::A)?;
//! assert!(report.converged);
//! # Ok::<(), defgmres::Error>(())
//! ```

pub mod bench;
pub mod cli;
pub mod deflation;
pub mod error;
pub mod harmonic;
pub mod io;
pub mod krylov;
pub mod linalg;
pub mod physics;
pub mod spectral;
pub mod testbed;

pub use error::{Error, Result};
