//! Competitive equilibrium computation for Fisher markets with divisible
//! chores.
//!
//! Agents must each earn a fixed budget by doing unpleasant work; chores
//! must be fully assigned; at equilibrium prices every agent covers their
//! budget with the least disutility possible. The [`gfw`] module computes
//! such equilibria by successive linearization of a convex dual program,
//! [`certify`] checks any candidate against the equilibrium definitions,
//! and [`epm`] provides an exterior-point baseline for comparison.

// Negated comparisons like `!(x > 0.0)` are deliberate NaN guards, and the
// dense numeric kernels read better with explicit indices.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod certify;
pub mod epm;
pub mod error;
pub mod gfw;
pub mod instances;
pub mod lp;
pub mod market;

pub use certify::{certify_ce, Certificate, KktWitness};
pub use error::{Error, Result};
pub use gfw::{GfwConfig, GfwResult, GfwStatus};
pub use market::{Allocation, ChoresInstance, DualPoint, EquilibriumCandidate};
