//! Numerical laboratory for controlled two-level avoided crossings with
//! randomly distributed gaps.
//!
//! The crate is organized in layers:
//!
//! - [`pauli`]: exact 2x2 complex algebra (states, Pauli vectors,
//!   Cayley-Klein unitaries, closed-form Pauli exponential);
//! - [`models`]: Hamiltonian families, pulse shapes, sweep functions and
//!   imperfection models;
//! - [`propagate`]: adaptive Runge-Kutta propagation of the two-level
//!   Schroedinger equation plus the analytic delta-kick composition;
//! - [`specfun`]: complex log-Gamma, closed-form asymptotic transition
//!   probabilities and the parabolic-cylinder-function propagator;
//! - [`ensemble`]: random-gap sampling, Monte Carlo averages,
//!   zero-transition couplings and control optimization.
//!
//! Ensemble loops run data-parallel on rayon when the `parallel` feature
//! (default) is enabled; a serial mode is available both at compile time
//! (`--no-default-features`) and at run time (see
//! [`ensemble::ModelTemplate::serial`]). Results are bit-identical across
//! both modes because per-sample RNG streams are keyed by sample index and
//! reductions happen in index order.

// validation code uses `!(x > 0.0)` deliberately: it rejects NaN along
// with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod models;
pub mod pauli;
pub mod propagate;
pub mod quad;
pub mod specfun;

mod error;

pub use error::{GlzError, Result};
