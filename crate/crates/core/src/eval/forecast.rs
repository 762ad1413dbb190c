use std::io::Write;

use serde::{Deserialize, Serialize};

use super::backtest::ensure_same_features;
use super::EvalError;
use crate::gbtree::BoostedModel;
use crate::panel::CountryPanel;

pub const DEFAULT_HORIZON: usize = 5;
pub const DEFAULT_TREND_WINDOW: usize = 8;

/// Target predictions past the panel's last year, driven by extrapolated
/// predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub country: String,
    pub horizon_years: Vec<i32>,
    pub predictions: Vec<f64>,
    pub feature_codes: Vec<String>,
    /// Extrapolated feature rows, one per horizon year. Never observed data.
    pub simulated_features: Vec<Vec<f64>>,
    /// How the features were extrapolated, e.g. `ols_trend_m8`.
    pub method: String,
    pub trend_window: usize,
}

pub fn method_name(trend_window: usize) -> String {
    format!("ols_trend_m{trend_window}")
}

/// Least-squares line through `points`, evaluated at `x`.
fn linear_trend(points: &[(f64, f64)], x: f64) -> f64 {
    let first = points[0].1;
    if points.iter().all(|p| p.1 == first) {
        return first;
    }
    let n = points.len() as f64;
    let x_mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - x_mean) * (p.1 - y_mean)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - x_mean).powi(2)).sum();
    y_mean + sxy / sxx * (x - x_mean)
}

/// Extends every feature column `horizon` years past the panel end with an
/// OLS linear trend through its last `trend_window` observed values.
/// Returns a `horizon × k` matrix without gaps.
pub fn simulate_predictors(
    panel: &CountryPanel,
    horizon: usize,
    trend_window: usize,
) -> Result<Vec<Vec<f64>>, EvalError> {
    if trend_window < 2 {
        return Err(EvalError::InvalidWindow(trend_window));
    }
    let last_year = *panel.years.last().ok_or(EvalError::EmptySplit("panel"))?;
    let mut columns = Vec::with_capacity(panel.n_features());
    for (j, code) in panel.feature_codes.iter().enumerate() {
        let observed: Vec<(f64, f64)> = panel
            .years
            .iter()
            .zip(&panel.features)
            .filter_map(|(&y, row)| row[j].filter(|v| !v.is_nan()).map(|v| (f64::from(y), v)))
            .collect();
        if observed.len() < 2 {
            return Err(EvalError::SparseFeature {
                code: code.clone(),
                observed: observed.len(),
            });
        }
        let recent = &observed[observed.len().saturating_sub(trend_window)..];
        columns.push(
            (1..=horizon)
                .map(|h| linear_trend(recent, f64::from(last_year) + h as f64))
                .collect::<Vec<_>>(),
        );
    }
    Ok((0..horizon)
        .map(|h| columns.iter().map(|c| c[h]).collect())
        .collect())
}

/// Predicts the `horizon` years after the panel's last year.
pub fn forecast(
    model: &BoostedModel,
    panel: &CountryPanel,
    horizon: usize,
    trend_window: usize,
) -> Result<ForecastResult, EvalError> {
    ensure_same_features(model, panel)?;
    let simulated = simulate_predictors(panel, horizon, trend_window)?;
    let last_year = *panel.years.last().ok_or(EvalError::EmptySplit("panel"))?;
    let predictions = simulated
        .iter()
        .map(|row| {
            let row: Vec<Option<f64>> = row.iter().copied().map(Some).collect();
            model.predict(&row)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ForecastResult {
        country: panel.country.clone(),
        horizon_years: (1..=horizon as i32).map(|h| last_year + h).collect(),
        predictions,
        feature_codes: panel.feature_codes.clone(),
        simulated_features: simulated,
        method: method_name(trend_window),
        trend_window,
    })
}

impl ForecastResult {
    /// `country,year,predicted,method`, one row per horizon year.
    pub fn write_csv<W: Write>(results: &[ForecastResult], writer: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["country", "year", "predicted", "method"])?;
        for r in results {
            for (year, p) in r.horizon_years.iter().zip(&r.predictions) {
                wtr.write_record([r.country.clone(), year.to_string(), p.to_string(), r.method.clone()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}
