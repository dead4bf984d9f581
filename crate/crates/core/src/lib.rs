//! Closed-form fundamental solutions and solvers for linear evolution
//! equations with one discrete delay,
//!
//! ```text
//! u'(t) = A0·u(t) + A1·u(t − τ) + g(t),    u = φ on [−τ, 0],
//! ```
//!
//! together with a spectral solver for the delayed heat equation on `[0, π]`
//! and independent brute-force oracles (method of steps, finite differences,
//! quadrature) used to verify every closed form.

pub mod error;
pub mod fundsol;
pub mod heatdelay;
pub mod ivpsolver;
pub mod matcore;
pub mod qkernel;
pub mod quadrature;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
pub use fundsol::{FundamentalSolution, Method, TruncationPolicy};
pub use ivpsolver::{DelaySystem, FormulaOptions, SolutionGrid, SolveMethod};
pub use matcore::{commutator, expm, opnorm, Matrix, Vector};
pub use qkernel::QTable;
