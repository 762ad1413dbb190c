use serde::{Deserialize, Serialize};

use super::GbtError;

/// Booster hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    /// Number of boosting rounds.
    pub n_estimators: usize,
    /// Shrinkage applied to every tree's output, in (0, 1].
    pub learning_rate: f64,
    /// Maximum tree depth; 0 grows single-leaf trees.
    pub max_depth: usize,
    /// Minimum hessian sum required in each child of a split.
    pub min_child_weight: f64,
    /// Per-leaf penalty, i.e. the minimum gain a split must bring.
    pub gamma: f64,
    /// Fraction of rows drawn for each tree.
    pub subsample: f64,
    /// Fraction of features drawn for each tree.
    pub colsample_bytree: f64,
    /// Fraction of the tree's features drawn at each depth level.
    pub colsample_bylevel: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// L1 penalty on leaf weights.
    pub alpha: f64,
    /// Accepted for compatibility; has no effect on regression.
    pub scale_pos_weight: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            learning_rate: 0.3,
            max_depth: 6,
            min_child_weight: 1.0,
            gamma: 0.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
            colsample_bylevel: 1.0,
            lambda: 1.0,
            alpha: 0.0,
            scale_pos_weight: 1.0,
        }
    }
}

fn check(ok: bool, name: &'static str, value: f64, constraint: &'static str) -> Result<(), GbtError> {
    if ok {
        Ok(())
    } else {
        Err(GbtError::InvalidParam {
            name,
            value: value.to_string(),
            constraint,
        })
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), GbtError> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        let non_neg = |v: f64| v >= 0.0 && v.is_finite();
        // n_estimators = 0 is valid: the model then predicts its base score
        check(unit(self.learning_rate), "learning_rate", self.learning_rate, "0 < x <= 1")?;
        check(non_neg(self.min_child_weight), "min_child_weight", self.min_child_weight, "x >= 0")?;
        check(non_neg(self.gamma), "gamma", self.gamma, "x >= 0")?;
        check(unit(self.subsample), "subsample", self.subsample, "0 < x <= 1")?;
        check(unit(self.colsample_bytree), "colsample_bytree", self.colsample_bytree, "0 < x <= 1")?;
        check(unit(self.colsample_bylevel), "colsample_bylevel", self.colsample_bylevel, "0 < x <= 1")?;
        check(non_neg(self.lambda), "lambda", self.lambda, "x >= 0")?;
        check(non_neg(self.alpha), "alpha", self.alpha, "x >= 0")?;
        check(
            self.scale_pos_weight > 0.0 && self.scale_pos_weight.is_finite(),
            "scale_pos_weight",
            self.scale_pos_weight,
            "x > 0",
        )?;
        Ok(())
    }
}
