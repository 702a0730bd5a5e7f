//! Average-cost optimality inequalities for finite and discretized Markov
//! decision processes via the vanishing-discount approach.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod mdp;
pub mod solver;
pub mod vanishing;
pub mod conditions;
pub mod models;
pub mod simulation;

pub use error::{Error, Result};
pub use mdp::{FiniteMdp, KernelRow, ModelClass, StationaryPolicy, ValueFn};
