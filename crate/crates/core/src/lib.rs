//! Gaussian-filtered Liouvillian maps, spectral flows and locality checks on
//! finite quantum spin systems, verified by exact diagonalization.
//!
//! The crate is layered bottom-up:
//!
//! - [`lattice`]: finite graphs, distances, balls and volume constants.
//! - [`algebra`]: local operators, embedding, conditional expectation, norms.
//! - [`interaction`]: time-dependent interactions and a small model library.
//! - [`spectra`]: eigendecomposition and spectral patch splitting.
//! - [`dynamics`]: Heisenberg evolution, smearing and Lieb-Robinson bounds.
//! - [`filtering`]: the Gaussian filter and the spectral kernels built on it.
//! - [`flow`]: spectral flows, generator localization and flow experiments.
//! - [`clustering`]: gap-implied decay of ground-patch correlations.
//! - [`qhe`]: flux threading and charge transport on small tori.
//! - [`harness`]: JSON-configured experiment runner and curve fitting.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate blas_src;
extern crate openblas_src;

pub mod algebra;
pub mod clustering;
pub mod dynamics;
pub mod error;
pub mod filtering;
pub mod flow;
pub mod harness;
pub mod interaction;
pub mod lattice;
pub mod linalg;
pub mod qhe;
pub mod spectra;

pub use error::{Error, Result};
