//! Direct estimation of the sparse difference between two network
//! Laplacians from node-potential samples.
//!
//! Systems obeying a conservation law `X = B·Y` (Kirchhoff-type balance
//! between injected flows `X` and node potentials `Y`) have potentials with
//! precision `B Σ_X⁻¹ B`. After whitening by the known injection covariance,
//! the square root of that precision is `B` itself, so the change
//! `B₂ − B₁` can be learned directly by an ℓ1-penalised D-trace estimator
//! built on square roots of sample covariances.
//!
//! Module map:
//! - [`linalg`]: symmetric eigendecomposition, PSD square roots, the
//!   two-sided linear solver and shrinkage.
//! - [`network`]: Laplacians, ground-node reduction, lattice differences,
//!   random base matrices and scenario assembly.
//! - [`sampling`]: potential sampling, whitening, `Ψ̂` estimates.
//! - [`estimator`]: loss, ADMM solver, plug-in baseline, unknown-covariance
//!   variant, Hessian kernel diagnostic.
//! - [`matpower`]: MATPOWER case parsing and branch-weighted Laplacians.
//! - [`experiment`]: metrics, trials and parameter sweeps.
//! - [`io`]: CSV formats.

// `!(x > 0.0)` is how parameter checks reject NaN along with bad values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod matpower;
pub mod network;
pub mod rng;
pub mod sampling;

pub use error::{Error, ErrorKind, Result};
pub use linalg::SymmetricMatrix;
