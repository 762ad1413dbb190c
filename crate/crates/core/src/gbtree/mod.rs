//! Second-order gradient-boosted regression trees.
//!
//! Each round fits a tree to the gradient `g` and hessian `h` of the
//! squared loss `½(y - ŷ)²` at the current predictions. Trees are grown
//! by exact greedy search: every midpoint between consecutive distinct
//! feature values is scored, with rows missing that feature sent left and
//! then right, and the best `(feature, threshold, default side)` wins if its
//! regularized gain is positive. Leaves carry `-soft(G, α) / (H + λ)`. The
//! ensemble predicts `base_score + Σ learning_rate · tree_t(x)`.

mod model;
mod params;
mod tree;

pub use model::{deserialize_model, fit, fit_matrix, serialize_model, BoostedModel, MODEL_FORMAT_VERSION};
pub use params::HyperParams;
pub use tree::{grow_tree, RegressionTree, TreeNode};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GbtError {
    #[error("hyperparameter {name} = {value} violates {constraint}")]
    InvalidParam {
        name: &'static str,
        value: String,
        constraint: &'static str,
    },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("empty input")]
    Empty,
    #[error("H + lambda must be positive (H = {hessian}, lambda = {lambda})")]
    NonPositiveCurvature { hessian: f64, lambda: f64 },
    #[error("training needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("non-finite target value at row {0}")]
    NonFiniteTarget(usize),
    #[error("row has {found} features, model expects {expected}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("malformed model document: {0}")]
    MalformedModel(String),
}

/// Gradient and hessian of `½(y - ŷ)²` with respect to `ŷ`.
pub fn compute_gradients(y: &[f64], yhat: &[f64]) -> Result<(Vec<f64>, Vec<f64>), GbtError> {
    if y.len() != yhat.len() {
        return Err(GbtError::LengthMismatch {
            expected: y.len(),
            found: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(GbtError::Empty);
    }
    let g = y.iter().zip(yhat).map(|(y, p)| p - y).collect();
    Ok((g, vec![1.0; y.len()]))
}

fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

/// Minimizer of `G·w + ½(H + λ)·w² + α·|w|`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64, alpha: f64) -> Result<f64, GbtError> {
    if !(h + lambda > 0.0) {
        return Err(GbtError::NonPositiveCurvature { hessian: h, lambda });
    }
    Ok(leaf_weight_unchecked(g, h, lambda, alpha))
}

pub(crate) fn leaf_weight_unchecked(g: f64, h: f64, lambda: f64, alpha: f64) -> f64 {
    let w = -soft_threshold(g, alpha) / (h + lambda);
    // avoid -0.0 in serialized models
    if w == 0.0 {
        0.0
    } else {
        w
    }
}

/// Loss reduction of splitting a node into (left, right), less `γ`.
pub fn split_gain(
    g_left: f64,
    h_left: f64,
    g_right: f64,
    h_right: f64,
    lambda: f64,
    gamma: f64,
) -> Result<f64, GbtError> {
    for h in [h_left, h_right] {
        if !(h + lambda > 0.0) {
            return Err(GbtError::NonPositiveCurvature { hessian: h, lambda });
        }
    }
    Ok(split_gain_unchecked(g_left, h_left, g_right, h_right, lambda, gamma))
}

pub(crate) fn split_gain_unchecked(
    g_left: f64,
    h_left: f64,
    g_right: f64,
    h_right: f64,
    lambda: f64,
    gamma: f64,
) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(g_left, h_left) + score(g_right, h_right)
        - score(g_left + g_right, h_left + h_right))
        - gamma
}
