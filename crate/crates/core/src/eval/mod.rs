//! Accuracy metric, chronological backtesting and horizon forecasts.

mod backtest;
mod forecast;

pub use backtest::{backtest, evaluate_model, split_train_test, BacktestReport, BacktestRow, Split};
pub use forecast::{forecast, simulate_predictors, ForecastResult, DEFAULT_HORIZON, DEFAULT_TREND_WINDOW};

use thiserror::Error;

use crate::gbtree::GbtError;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("MAPE of empty vectors")]
    Empty,
    #[error("length mismatch: {actual} actuals, {forecast} forecasts")]
    LengthMismatch { actual: usize, forecast: usize },
    #[error("division by zero: actual value at position {index} is 0")]
    ZeroActual { index: usize },
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("feature {code} has {observed} observed value(s); extrapolation needs 2")]
    SparseFeature { code: String, observed: usize },
    #[error("trend window must be at least 2, got {0}")]
    InvalidWindow(usize),
    #[error("model features {model:?} do not match panel features {panel:?}")]
    FeatureMismatch { model: Vec<String>, panel: Vec<String> },
    #[error(transparent)]
    Model(#[from] GbtError),
}

/// Mean absolute percentage error, in percent:
/// `100/n · Σ |(A_i - F_i) / A_i|`. Any zero actual is an error.
pub fn mape(actual: &[f64], forecast: &[f64]) -> Result<f64, EvalError> {
    if actual.len() != forecast.len() {
        return Err(EvalError::LengthMismatch {
            actual: actual.len(),
            forecast: forecast.len(),
        });
    }
    if actual.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(index) = actual.iter().position(|&a| a == 0.0) {
        return Err(EvalError::ZeroActual { index });
    }
    let total: f64 = actual
        .iter()
        .zip(forecast)
        .map(|(a, f)| ((a - f) / a).abs())
        .sum();
    Ok(total / actual.len() as f64 * 100.0)
}
