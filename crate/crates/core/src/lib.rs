//! Dense CP tensor decomposition with stochastic, momentum and perturbed
//! solvers, plus a one-class damage-detection layer built on the factors.

// NaN has to fail the range checks written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anomaly;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod pipeline;
pub mod solvers;
pub mod tensor;

pub use error::{Error, Result};
pub use exec::{split_seed, Parallelism};
pub use tensor::{DenseTensor, KruskalModel, Matrix};
