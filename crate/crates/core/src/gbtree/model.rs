use serde::{Deserialize, Serialize};

use super::{compute_gradients, grow_tree, GbtError, HyperParams, RegressionTree};
use crate::panel::CountryPanel;
use crate::sampling::rng_from_seed;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Trained ensemble. Immutable once fitted; share freely across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub feature_codes: Vec<String>,
    pub hyperparams: HyperParams,
    pub seed: u64,
    pub trees: Vec<RegressionTree>,
}

impl BoostedModel {
    pub fn n_features(&self) -> usize {
        self.feature_codes.len()
    }

    /// `base_score + Σ learning_rate · tree(row)`, trees in training order.
    pub fn predict(&self, row: &[Option<f64>]) -> Result<f64, GbtError> {
        if row.len() != self.n_features() {
            return Err(GbtError::ArityMismatch {
                expected: self.n_features(),
                found: row.len(),
            });
        }
        Ok(self.predict_unchecked(row))
    }

    fn predict_unchecked(&self, row: &[Option<f64>]) -> f64 {
        self.trees
            .iter()
            .fold(self.base_score, |acc, t| acc + self.learning_rate * t.predict(row))
    }

    pub fn predict_rows(&self, rows: &[Vec<Option<f64>>]) -> Result<Vec<f64>, GbtError> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    pub fn predict_panel(&self, panel: &CountryPanel) -> Result<Vec<f64>, GbtError> {
        self.predict_rows(&panel.features)
    }

    /// Total split gain per feature, in `feature_codes` order.
    pub fn feature_importance(&self) -> Vec<(String, f64)> {
        let mut totals = vec![0.0; self.n_features()];
        fn walk(node: &super::TreeNode, totals: &mut [f64]) {
            if let super::TreeNode::Split {
                feature_index,
                gain,
                left,
                right,
                ..
            } = node
            {
                totals[*feature_index] += gain;
                walk(left, totals);
                walk(right, totals);
            }
        }
        for t in &self.trees {
            walk(&t.root, &mut totals);
        }
        self.feature_codes.iter().cloned().zip(totals).collect()
    }
}

/// Fits on every row of `panel`.
pub fn fit(panel: &CountryPanel, params: &HyperParams, seed: u64) -> Result<BoostedModel, GbtError> {
    fit_matrix(&panel.features, &panel.target, &panel.feature_codes, params, seed)
}

/// Fits on a row-major feature matrix `x` with targets `y`. The base score
/// is the mean target; each round adds one tree grown on the gradients at
/// the current predictions.
pub fn fit_matrix(
    x: &[Vec<Option<f64>>],
    y: &[f64],
    feature_codes: &[String],
    params: &HyperParams,
    seed: u64,
) -> Result<BoostedModel, GbtError> {
    params.validate()?;
    if x.len() != y.len() {
        return Err(GbtError::LengthMismatch {
            expected: y.len(),
            found: x.len(),
        });
    }
    if y.len() < 2 {
        return Err(GbtError::TooFewRows(y.len()));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(GbtError::NonFiniteTarget(i));
    }
    if let Some(row) = x.iter().find(|r| r.len() != feature_codes.len()) {
        return Err(GbtError::ArityMismatch {
            expected: feature_codes.len(),
            found: row.len(),
        });
    }
    if params.scale_pos_weight != 1.0 {
        log::warn!(
            "scale_pos_weight = {} has no effect on regression and is ignored",
            params.scale_pos_weight
        );
    }

    let base_score = y.iter().sum::<f64>() / y.len() as f64;
    let mut model = BoostedModel {
        base_score,
        learning_rate: params.learning_rate,
        feature_codes: feature_codes.to_vec(),
        hyperparams: params.clone(),
        seed,
        trees: Vec::with_capacity(params.n_estimators),
    };
    let mut rng = rng_from_seed(seed);
    let rows: Vec<usize> = (0..y.len()).collect();
    let mut yhat = vec![base_score; y.len()];
    for _ in 0..params.n_estimators {
        let (g, h) = compute_gradients(y, &yhat)?;
        let tree = grow_tree(&rows, x, &g, &h, params, &mut rng)?;
        for (p, row) in yhat.iter_mut().zip(x) {
            *p += model.learning_rate * tree.predict(row);
        }
        model.trees.push(tree);
    }
    Ok(model)
}

#[derive(Serialize)]
struct ModelDocumentRef<'a> {
    version: u32,
    #[serde(flatten)]
    model: &'a BoostedModel,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    #[allow(dead_code)]
    version: u32,
    base_score: f64,
    learning_rate: f64,
    feature_codes: Vec<String>,
    hyperparams: HyperParams,
    seed: u64,
    trees: Vec<RegressionTree>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: Option<u32>,
}

/// Versioned JSON document; floats are written with shortest round-trip
/// precision.
pub fn serialize_model(model: &BoostedModel) -> String {
    serde_json::to_string_pretty(&ModelDocumentRef {
        version: MODEL_FORMAT_VERSION,
        model,
    })
    .expect("model serializes")
}

pub fn deserialize_model(text: &str) -> Result<BoostedModel, GbtError> {
    let malformed = |e: serde_json::Error| GbtError::MalformedModel(e.to_string());
    let probe: VersionProbe = serde_json::from_str(text).map_err(malformed)?;
    match probe.version {
        Some(MODEL_FORMAT_VERSION) => {}
        Some(found) => {
            return Err(GbtError::VersionMismatch {
                found,
                expected: MODEL_FORMAT_VERSION,
            })
        }
        None => return Err(GbtError::MalformedModel("missing field `version`".into())),
    }
    let doc: ModelDocument = serde_json::from_str(text).map_err(malformed)?;
    doc.hyperparams.validate()?;
    if !(doc.base_score.is_finite() && doc.learning_rate > 0.0 && doc.learning_rate <= 1.0) {
        return Err(GbtError::MalformedModel(format!(
            "base_score {} / learning_rate {}",
            doc.base_score, doc.learning_rate
        )));
    }
    for tree in &doc.trees {
        tree.validate(doc.feature_codes.len())?;
    }
    Ok(BoostedModel {
        base_score: doc.base_score,
        learning_rate: doc.learning_rate,
        feature_codes: doc.feature_codes,
        hyperparams: doc.hyperparams,
        seed: doc.seed,
        trees: doc.trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbtree::TreeNode;

    fn codes(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("F{i}")).collect()
    }

    #[test]
    fn zero_rounds_predicts_mean() {
        let x = vec![vec![Some(1.0)], vec![Some(2.0)], vec![None]];
        let p = HyperParams {
            n_estimators: 0,
            ..HyperParams::default()
        };
        let m = fit_matrix(&x, &[1.0, 2.0, 6.0], &codes(1), &p, 0).unwrap();
        assert!(m.trees.is_empty());
        assert_eq!(m.base_score, 3.0);
        assert_eq!(m.predict(&[Some(100.0)]).unwrap(), 3.0);
        assert_eq!(m.predict(&[None]).unwrap(), 3.0);
    }

    #[test]
    fn stump_round_lands_on_mean() {
        let x = vec![vec![Some(1.0)], vec![Some(2.0)], vec![Some(3.0)]];
        let p = HyperParams {
            n_estimators: 3,
            max_depth: 0,
            learning_rate: 1.0,
            lambda: 0.0,
            alpha: 0.0,
            ..HyperParams::default()
        };
        let m = fit_matrix(&x, &[1.0, 2.0, 3.0], &codes(1), &p, 0).unwrap();
        for row in &x {
            assert_eq!(m.predict(row).unwrap(), 2.0);
        }
        for t in &m.trees {
            assert_eq!(t.root, TreeNode::Leaf { weight: 0.0 });
        }
    }

    #[test]
    fn same_seed_same_model() {
        let x: Vec<Vec<Option<f64>>> = (0..12)
            .map(|i| vec![Some(i as f64), if i % 4 == 0 { None } else { Some((i * i % 7) as f64) }])
            .collect();
        let y: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin() + 3.0).collect();
        let p = HyperParams {
            n_estimators: 20,
            subsample: 0.8,
            colsample_bytree: 0.6,
            ..HyperParams::default()
        };
        let a = fit_matrix(&x, &y, &codes(2), &p, 99).unwrap();
        let b = fit_matrix(&x, &y, &codes(2), &p, 99).unwrap();
        assert_eq!(serialize_model(&a), serialize_model(&b));
    }

    #[test]
    fn all_missing_follows_defaults() {
        // root: f0 < 5 (missing -> right); right: f1 < 1 (missing -> left)
        let tree = RegressionTree::from_root(TreeNode::Split {
            feature_index: 0,
            threshold: 5.0,
            default_goes_left: false,
            gain: 1.0,
            left: Box::new(TreeNode::Leaf { weight: 10.0 }),
            right: Box::new(TreeNode::Split {
                feature_index: 1,
                threshold: 1.0,
                default_goes_left: true,
                gain: 0.5,
                left: Box::new(TreeNode::Leaf { weight: -4.0 }),
                right: Box::new(TreeNode::Leaf { weight: 7.0 }),
            }),
        });
        let m = BoostedModel {
            base_score: 2.0,
            learning_rate: 0.5,
            feature_codes: codes(2),
            hyperparams: HyperParams::default(),
            seed: 0,
            trees: vec![tree],
        };
        assert_eq!(m.predict(&[None, None]).unwrap(), 2.0 + 0.5 * -4.0);
        assert_eq!(m.predict(&[Some(1.0), None]).unwrap(), 2.0 + 0.5 * 10.0);
        assert_eq!(m.predict(&[Some(f64::NAN), Some(3.0)]).unwrap(), 2.0 + 0.5 * 7.0);
        assert!(matches!(m.predict(&[None]), Err(GbtError::ArityMismatch { expected: 2, found: 1 })));
        let imp = m.feature_importance();
        assert_eq!(imp, vec![("F0".to_string(), 1.0), ("F1".to_string(), 0.5)]);
    }

    #[test]
    fn fit_errors() {
        let p = HyperParams::default();
        assert_eq!(fit_matrix(&[vec![]], &[1.0], &[], &p, 0), Err(GbtError::TooFewRows(1)));
        assert_eq!(
            fit_matrix(&[vec![], vec![]], &[1.0, f64::NAN], &[], &p, 0),
            Err(GbtError::NonFiniteTarget(1))
        );
        assert!(fit_matrix(&[vec![], vec![None]], &[1.0, 2.0], &[], &p, 0).is_err());
    }

    #[test]
    fn document_round_trip_and_errors() {
        let x: Vec<Vec<Option<f64>>> = (0..8).map(|i| vec![Some(i as f64 / 3.0)]).collect();
        let y: Vec<f64> = (0..8).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let m = fit_matrix(&x, &y, &codes(1), &HyperParams { n_estimators: 5, ..HyperParams::default() }, 3).unwrap();
        let text = serialize_model(&m);
        assert_eq!(deserialize_model(&text).unwrap(), m);

        let truncated = &text[..text.len() / 2];
        assert!(matches!(deserialize_model(truncated), Err(GbtError::MalformedModel(_))));

        let bumped = text.replacen("\"version\": 1", "\"version\": 2", 1);
        assert_eq!(
            deserialize_model(&bumped),
            Err(GbtError::VersionMismatch { found: 2, expected: 1 })
        );

        let empty = BoostedModel { trees: vec![], ..m.clone() };
        assert_eq!(deserialize_model(&serialize_model(&empty)).unwrap(), empty);

        let bad_feature = text.replace("\"feature_index\": 0", "\"feature_index\": 3");
        if bad_feature != text {
            assert!(deserialize_model(&bad_feature).is_err());
        }
    }
}
