//! Finding the sparsest direction in a subspace by minimizing sparsity
//! surrogates `phi(Y^T q)` over the unit sphere.
//!
//! The crate is `no_std` (it needs `alloc`). Everything is deterministic
//! given its inputs and seeds.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod loss;
pub mod models;
pub mod objective;
pub mod rng;
pub mod solvers;
pub mod sphere;

pub use error::{Error, Result};
pub use loss::{LossKind, LossSpec, Smoothness};
pub use models::{ModelKind, ProblemInstance, TargetSet};
pub use objective::Objective;
pub use solvers::{SolveResult, SolverConfig, SolverKind, Status, StepSchedule};
pub use sphere::{TangentVector, UnitVector};
