//! Forecasting toolkit for short yearly country panels.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`panel`] ingests a wide World-Development-Indicators style CSV of
//!    candidate predictors and a long CSV of the target index, repairs gaps
//!    and assembles one [`panel::CountryPanel`] per country.
//! 2. [`edr`] ranks every candidate indicator by Edit Distance on Real
//!    sequence against the (z-normalized) target and keeps the closest `k`.
//! 3. [`gbtree`] fits a second-order gradient-boosted regression tree
//!    ensemble, tuned by exhaustive grid search with chronological
//!    cross-validation in [`tuning`].
//! 4. [`eval`] backtests on a chronological train/test split with MAPE and
//!    forecasts the target a few years ahead from extrapolated predictors.

pub mod edr;
pub mod eval;
pub mod gbtree;
pub mod panel;
pub mod sampling;
pub mod tuning;

mod error;

pub use error::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;
