//! Portfolio toolkit for multivariate Merton jump-diffusion markets.
//!
//! Simulates terminal wealth of periodic constant-mix investments, computes comonotonic
//! lower bounds with closed-form CVaR, and solves the CLVaR-constrained allocation
//! problem in closed form.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod comonotonic;
pub mod error;
pub mod estimation;
pub mod model;
pub mod numerics;
pub mod optimizer;
pub mod parallel;
pub mod risk;
pub mod simulation;

pub use error::{Error, Result};
pub use model::{JumpLaw, MarketParams, PortfolioSpec, RiskBudget, WealthFloor};
