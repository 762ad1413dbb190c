use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{mape, EvalError};
use crate::gbtree::{fit, BoostedModel, HyperParams};
use crate::panel::CountryPanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestRow {
    pub year: i32,
    pub split: Split,
    pub actual: f64,
    pub predicted: f64,
}

/// In-sample and out-of-sample accuracy of one country's model. MAPEs are
/// in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub country: String,
    pub last_train_year: i32,
    pub train_mape: f64,
    pub test_mape: f64,
    /// One row per panel year, in year order.
    pub rows: Vec<BacktestRow>,
}

/// Splits into years `<= last_train_year` and years after it.
pub fn split_train_test(
    panel: &CountryPanel,
    last_train_year: i32,
) -> Result<(CountryPanel, CountryPanel), EvalError> {
    let (train, test): (Vec<usize>, Vec<usize>) =
        (0..panel.n_rows()).partition(|&i| panel.years[i] <= last_train_year);
    if train.is_empty() {
        return Err(EvalError::EmptySplit("train"));
    }
    if test.is_empty() {
        return Err(EvalError::EmptySplit("test"));
    }
    Ok((panel.select_rows(&train), panel.select_rows(&test)))
}

fn check_features(model: &BoostedModel, panel: &CountryPanel) -> Result<(), EvalError> {
    if model.feature_codes != panel.feature_codes {
        return Err(EvalError::FeatureMismatch {
            model: model.feature_codes.clone(),
            panel: panel.feature_codes.clone(),
        });
    }
    Ok(())
}

pub(crate) fn ensure_same_features(model: &BoostedModel, panel: &CountryPanel) -> Result<(), EvalError> {
    check_features(model, panel)
}

/// Scores an already-trained model on both sides of the split.
pub fn evaluate_model(
    model: &BoostedModel,
    panel: &CountryPanel,
    last_train_year: i32,
) -> Result<BacktestReport, EvalError> {
    check_features(model, panel)?;
    let (train, test) = split_train_test(panel, last_train_year)?;
    let train_pred = model.predict_panel(&train)?;
    let test_pred = model.predict_panel(&test)?;
    let train_mape = mape(&train.target, &train_pred)?;
    let test_mape = mape(&test.target, &test_pred)?;

    let rows = [(Split::Train, &train, &train_pred), (Split::Test, &test, &test_pred)]
        .into_iter()
        .flat_map(|(split, part, pred)| {
            part.years
                .iter()
                .zip(&part.target)
                .zip(pred)
                .map(move |((&year, &actual), &predicted)| BacktestRow {
                    year,
                    split,
                    actual,
                    predicted,
                })
        })
        .collect();
    Ok(BacktestReport {
        country: panel.country.clone(),
        last_train_year,
        train_mape,
        test_mape,
        rows,
    })
}

/// Fits on the training years, then scores in-sample and out-of-sample.
pub fn backtest(
    panel: &CountryPanel,
    params: &HyperParams,
    seed: u64,
    last_train_year: i32,
) -> Result<BacktestReport, EvalError> {
    let (train, _) = split_train_test(panel, last_train_year)?;
    let model = fit(&train, params, seed)?;
    evaluate_model(&model, panel, last_train_year)
}

impl BacktestReport {
    /// Appends `country,split,year,actual,predicted` rows (no header).
    pub fn write_rows<W: Write>(&self, wtr: &mut csv::Writer<W>) -> Result<(), csv::Error> {
        for r in &self.rows {
            wtr.write_record([
                self.country.clone(),
                r.split.to_string(),
                r.year.to_string(),
                r.actual.to_string(),
                r.predicted.to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn write_rows_csv<W: Write>(reports: &[BacktestReport], writer: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["country", "split", "year", "actual", "predicted"])?;
        for r in reports {
            r.write_rows(&mut wtr)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// `country,train_mape,test_mape`, one row per report.
    pub fn write_summary_csv<W: Write>(reports: &[BacktestReport], writer: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["country", "train_mape", "test_mape"])?;
        for r in reports {
            wtr.write_record([r.country.clone(), r.train_mape.to_string(), r.test_mape.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
