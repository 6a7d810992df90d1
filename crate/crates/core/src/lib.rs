//! Exact Bernstein operational matrices and a spectral Galerkin solver for
//! Emden-Fowler / Lane-Emden initial value problems.
//!
//! The crate is organised bottom-up:
//!
//! * [`basis`]: Bernstein basis, monomial change of basis, degree elevation.
//! * [`operators`]: exact differentiation, integration, product, power and
//!   series matrices, plus the Galerkin (Gram) matrix.
//! * [`problem`]: problem descriptions and the registry of canonical cases.
//! * [`galerkin`]: residual assembly and the Newton solve, in exact (EOM) or
//!   projected (OOM) mode.
//! * [`reference`]: closed-form solutions, a DOP853 reference integrator and
//!   the truncation-length rule.
//! * [`metrics`]: norm-1 measurements, m-sweeps and report files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod error;
pub mod galerkin;
pub mod matrix;
pub mod metrics;
pub mod operators;
pub mod problem;
pub mod quadrature;
pub mod reference;
pub mod scalar;

pub use basis::{CoeffVector, MAX_BASIS_DEGREE};
pub use error::{EomError, Result};
pub use galerkin::{solve, Mode, Prepared, ResidualSystem, Solution, SolveConfig};
pub use matrix::{Matrix, RationalMatrix};
pub use metrics::{run_sweep, SweepRecord, SweepReport};
pub use problem::{FKind, GKind, ProblemSpec};
pub use reference::ReferenceSolution;
pub use scalar::{Rational, Scalar};
