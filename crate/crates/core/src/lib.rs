//! Minimum probability of lifetime ruin for a retiree who can buy life
//! annuities and later surrender them for a proportional charge.
//!
//! Three closed-form solvers cover borrowing against the annuity
//! ([`unrestricted`]) and non-negative wealth with a high
//! ([`restricted_high`]) or low ([`restricted_low`]) surrender charge.
//! [`regime`] picks the right one. The [`verify`] module holds independent
//! finite-difference and Monte Carlo oracles and the checks that compare
//! them with the closed forms.

// Non-finite inputs are rejected with negated comparisons such as
// `!(x > 0.0)`, which are true for NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dual;
pub mod error;
pub mod model;
pub mod numerics;
pub mod regime;
pub mod restricted_high;
pub mod restricted_low;
pub mod unrestricted;
pub mod verify;

pub use error::{Error, Result};
pub use model::{DerivedConstants, Model, ModelParams, PortfolioState};
pub use regime::{classify, Regime, RegimeSolution, ValueFunction};
