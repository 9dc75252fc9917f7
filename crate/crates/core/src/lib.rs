//! Corporate governance, noise trading and stock liquidity.
//!
//! - [`firm_model`]: agency cost, share values and the benefit of control.
//! - [`auction`]: the sequential block-sale auction and its equilibrium checker.
//! - [`liquidity`]: the discount probability `F`, the index `ILL` and synergy analytics.
//! - [`sweep`]: configuration, grid sweeps and the command implementations behind the CLI.

// Validation uses `!(x > 0.0)` style checks so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auction;
pub mod error;
pub mod firm_model;
pub mod liquidity;
pub mod rng;
pub mod sweep;

pub use error::{Error, FieldError, Result};
