//! Exhaustive grid search with chronological k-fold cross-validation,
//! scored by MAPE.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{mape, EvalError};
use crate::gbtree::{fit, GbtError, HyperParams};
use crate::panel::CountryPanel;
use crate::sampling::{fisher_yates, rng_from_seed};

#[derive(Debug, Error, PartialEq)]
pub enum TuningError {
    #[error("grid list for {0} is empty")]
    EmptyGridList(&'static str),
    #[error("grid value for {field}: {source}")]
    InvalidGridValue {
        field: &'static str,
        #[source]
        source: GbtError,
    },
    #[error("cannot split {n} rows into {k} folds (need 2 <= k <= n)")]
    InvalidFolds { n: usize, k: usize },
    #[error("every grid combination was disqualified; first failure: {reason}")]
    AllDisqualified { reason: String },
    #[error("fold {fold}: {source}")]
    Fit {
        fold: usize,
        #[source]
        source: GbtError,
    },
}

/// Candidate values per hyperparameter. A field left as `None` stays at its
/// [`HyperParams::default`] value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n_estimators: Option<Vec<usize>>,
    pub learning_rate: Option<Vec<f64>>,
    pub max_depth: Option<Vec<usize>>,
    pub min_child_weight: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub subsample: Option<Vec<f64>>,
    pub colsample_bytree: Option<Vec<f64>>,
    pub colsample_bylevel: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub scale_pos_weight: Option<Vec<f64>>,
}

fn expand<T: Clone>(
    combos: Vec<HyperParams>,
    field: &'static str,
    values: &Option<Vec<T>>,
    set: impl Fn(&mut HyperParams, T),
) -> Result<Vec<HyperParams>, TuningError> {
    let Some(values) = values else {
        return Ok(combos);
    };
    if values.is_empty() {
        return Err(TuningError::EmptyGridList(field));
    }
    let mut out = Vec::with_capacity(combos.len() * values.len());
    for base in &combos {
        for v in values {
            let mut p = base.clone();
            set(&mut p, v.clone());
            p.validate()
                .map_err(|source| TuningError::InvalidGridValue { field, source })?;
            out.push(p);
        }
    }
    Ok(out)
}

impl GridSpec {
    /// The typical values commonly listed for each booster hyperparameter.
    pub fn typical_values() -> Self {
        Self {
            n_estimators: Some(vec![100, 500, 1000]),
            learning_rate: Some(vec![0.01, 0.1, 0.3]),
            max_depth: Some(vec![3, 5, 7, 10]),
            min_child_weight: Some(vec![1.0, 3.0, 5.0]),
            gamma: Some(vec![0.0, 0.1, 0.5, 1.0]),
            subsample: Some(vec![0.6, 0.8, 1.0]),
            colsample_bytree: Some(vec![0.6, 0.8, 1.0]),
            colsample_bylevel: Some(vec![0.6, 0.8, 1.0]),
            lambda: Some(vec![0.0, 1.0, 5.0, 10.0]),
            alpha: Some(vec![0.0, 1.0, 5.0, 10.0]),
            scale_pos_weight: Some(vec![1.0]),
        }
    }

    /// Number of combinations, without materializing them.
    pub fn cardinality(&self) -> usize {
        fn len<T>(v: &Option<Vec<T>>) -> usize {
            v.as_ref().map_or(1, Vec::len)
        }
        len(&self.n_estimators)
            * len(&self.learning_rate)
            * len(&self.max_depth)
            * len(&self.min_child_weight)
            * len(&self.gamma)
            * len(&self.subsample)
            * len(&self.colsample_bytree)
            * len(&self.colsample_bylevel)
            * len(&self.lambda)
            * len(&self.alpha)
            * len(&self.scale_pos_weight)
    }

    /// Every combination in lexicographic order of the lists: fields in
    /// declaration order, the first field varying slowest.
    pub fn combinations(&self) -> Result<Vec<HyperParams>, TuningError> {
        let c = vec![HyperParams::default()];
        let c = expand(c, "n_estimators", &self.n_estimators, |p, v| p.n_estimators = v)?;
        let c = expand(c, "learning_rate", &self.learning_rate, |p, v| p.learning_rate = v)?;
        let c = expand(c, "max_depth", &self.max_depth, |p, v| p.max_depth = v)?;
        let c = expand(c, "min_child_weight", &self.min_child_weight, |p, v| p.min_child_weight = v)?;
        let c = expand(c, "gamma", &self.gamma, |p, v| p.gamma = v)?;
        let c = expand(c, "subsample", &self.subsample, |p, v| p.subsample = v)?;
        let c = expand(c, "colsample_bytree", &self.colsample_bytree, |p, v| p.colsample_bytree = v)?;
        let c = expand(c, "colsample_bylevel", &self.colsample_bylevel, |p, v| p.colsample_bylevel = v)?;
        let c = expand(c, "lambda", &self.lambda, |p, v| p.lambda = v)?;
        let c = expand(c, "alpha", &self.alpha, |p, v| p.alpha = v)?;
        expand(c, "scale_pos_weight", &self.scale_pos_weight, |p, v| p.scale_pos_weight = v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub k: usize,
    /// Shuffle rows before cutting folds. Leaks neighbouring years into
    /// validation; off by default.
    pub shuffled: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k: 3,
            shuffled: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Contiguous validation blocks over `0..n`; the first `n % k` blocks get
/// one extra row.
pub fn kfold_splits(n: usize, k: usize) -> Result<Vec<Fold>, TuningError> {
    let order: Vec<usize> = (0..n).collect();
    folds_over(&order, k)
}

/// Same block structure over a seeded permutation of the rows.
pub fn shuffled_kfold_splits(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>, TuningError> {
    let mut order: Vec<usize> = (0..n).collect();
    fisher_yates(&mut order, &mut rng_from_seed(seed));
    folds_over(&order, k)
}

fn folds_over(order: &[usize], k: usize) -> Result<Vec<Fold>, TuningError> {
    let n = order.len();
    if k < 2 || k > n {
        return Err(TuningError::InvalidFolds { n, k });
    }
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    Ok((0..k)
        .map(|f| {
            let len = base + usize::from(f < extra);
            let mut validation = order[start..start + len].to_vec();
            let mut train: Vec<usize> = order[..start].iter().chain(&order[start + len..]).copied().collect();
            validation.sort_unstable();
            train.sort_unstable();
            start += len;
            Fold { train, validation }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    /// Position of the combination in grid order.
    pub grid_index: usize,
    pub params: HyperParams,
    pub mean_score: f64,
    pub fold_scores: Vec<f64>,
}

/// A combination dropped because at least one fold could not be scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disqualified {
    pub grid_index: usize,
    pub params: HyperParams,
    /// Per fold: the score, or the scoring error.
    pub folds: Vec<Result<f64, String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_params: HyperParams,
    pub best_score: f64,
    /// Ascending by mean score; ties keep grid order.
    pub leaderboard: Vec<LeaderboardEntry>,
    pub disqualified: Vec<Disqualified>,
}

/// Validation MAPE of one (combination, fold) cell.
pub fn score_fold(
    panel: &CountryPanel,
    fold: &Fold,
    params: &HyperParams,
    seed: u64,
) -> Result<Result<f64, EvalError>, GbtError> {
    let model = fit(&panel.select_rows(&fold.train), params, seed)?;
    let validation = panel.select_rows(&fold.validation);
    let predicted = model.predict_panel(&validation)?;
    Ok(mape(&validation.target, &predicted))
}

/// Scores every combination of `grid` by mean cross-validated MAPE. Every
/// fit uses `seed`, so a combination's score does not depend on where it
/// sits in the grid.
pub fn grid_search(
    panel: &CountryPanel,
    grid: &GridSpec,
    cv: &CvConfig,
    seed: u64,
) -> Result<TuneResult, TuningError> {
    let combos = grid.combinations()?;
    let folds = if cv.shuffled {
        shuffled_kfold_splits(panel.n_rows(), cv.k, seed)?
    } else {
        kfold_splits(panel.n_rows(), cv.k)?
    };

    let scored: Vec<Vec<Result<f64, EvalError>>> = combos
        .par_iter()
        .map(|params| {
            folds
                .iter()
                .enumerate()
                .map(|(i, fold)| {
                    score_fold(panel, fold, params, seed).map_err(|source| TuningError::Fit { fold: i, source })
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let mut leaderboard = Vec::new();
    let mut disqualified = Vec::new();
    for (grid_index, (params, folds)) in combos.into_iter().zip(scored).enumerate() {
        if folds.iter().all(Result::is_ok) {
            let fold_scores: Vec<f64> = folds.into_iter().map(Result::unwrap).collect();
            let mean_score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
            leaderboard.push(LeaderboardEntry {
                grid_index,
                params,
                mean_score,
                fold_scores,
            });
        } else {
            disqualified.push(Disqualified {
                grid_index,
                params,
                folds: folds.into_iter().map(|r| r.map_err(|e| e.to_string())).collect(),
            });
        }
    }
    // stable: equal means keep grid order
    leaderboard.sort_by(|a, b| a.mean_score.total_cmp(&b.mean_score));
    let Some(best) = leaderboard.first() else {
        let reason = disqualified
            .first()
            .and_then(|d| {
                d.folds
                    .iter()
                    .enumerate()
                    .find_map(|(i, f)| f.as_ref().err().map(|e| format!("fold {i}: {e}")))
            })
            .unwrap_or_default();
        return Err(TuningError::AllDisqualified { reason });
    };
    Ok(TuneResult {
        best_params: best.params.clone(),
        best_score: best.mean_score,
        leaderboard,
        disqualified,
    })
}

impl TuneResult {
    /// Writes `rank,params_json,mean_mape,fold_scores_json`. Disqualified
    /// combinations follow the ranked rows with rank `disqualified`, an
    /// empty mean, and `{"error": ...}` in place of each failed fold.
    pub fn write_leaderboard_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["rank", "params_json", "mean_mape", "fold_scores_json"])?;
        for (i, e) in self.leaderboard.iter().enumerate() {
            wtr.write_record([
                (i + 1).to_string(),
                serde_json::to_string(&e.params).expect("params serialize"),
                e.mean_score.to_string(),
                serde_json::to_string(&e.fold_scores).expect("scores serialize"),
            ])?;
        }
        for d in &self.disqualified {
            let folds: Vec<serde_json::Value> = d
                .folds
                .iter()
                .map(|f| match f {
                    Ok(v) => serde_json::json!(v),
                    Err(e) => serde_json::json!({ "error": e }),
                })
                .collect();
            wtr.write_record([
                "disqualified".to_string(),
                serde_json::to_string(&d.params).expect("params serialize"),
                String::new(),
                serde_json::to_string(&folds).expect("folds serialize"),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
