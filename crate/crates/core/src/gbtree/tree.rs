use serde::{Deserialize, Serialize};

use super::{leaf_weight_unchecked, split_gain_unchecked, GbtError, HyperParams};
use crate::sampling::{sample_sorted, TrainRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TreeNode {
    Leaf {
        weight: f64,
    },
    /// Rows with `value < threshold` go left, the rest right; a missing
    /// value follows `default_goes_left`.
    Split {
        feature_index: usize,
        threshold: f64,
        default_goes_left: bool,
        /// Regularized gain the split achieved at training time.
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn goes_left(value: Option<f64>, threshold: f64, default_goes_left: bool) -> bool {
        match value {
            Some(v) if !v.is_nan() => v < threshold,
            _ => default_goes_left,
        }
    }

    fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }

    fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionTree {
    pub root: TreeNode,
    pub num_leaves: usize,
}

impl RegressionTree {
    pub fn leaf(weight: f64) -> Self {
        Self {
            root: TreeNode::Leaf { weight },
            num_leaves: 1,
        }
    }

    pub fn from_root(root: TreeNode) -> Self {
        let num_leaves = root.leaves();
        Self { root, num_leaves }
    }

    /// Leaf weight reached by `row`. Indices past the row's end read as
    /// missing.
    pub fn predict(&self, row: &[Option<f64>]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature_index,
                    threshold,
                    default_goes_left,
                    left,
                    right,
                    ..
                } => {
                    let value = row.get(*feature_index).copied().flatten();
                    node = if TreeNode::goes_left(value, *threshold, *default_goes_left) {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub(crate) fn validate(&self, n_features: usize) -> Result<(), GbtError> {
        fn walk(node: &TreeNode, n_features: usize) -> Result<(), GbtError> {
            match node {
                TreeNode::Leaf { weight } if weight.is_finite() => Ok(()),
                TreeNode::Leaf { weight } => Err(GbtError::MalformedModel(format!("leaf weight {weight}"))),
                TreeNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if *feature_index >= n_features {
                        return Err(GbtError::MalformedModel(format!(
                            "split on feature {feature_index} of {n_features}"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(GbtError::MalformedModel(format!("threshold {threshold}")));
                    }
                    walk(left, n_features)?;
                    walk(right, n_features)
                }
            }
        }
        walk(&self.root, n_features)?;
        if self.num_leaves != self.root.leaves() {
            return Err(GbtError::MalformedModel(format!(
                "num_leaves {} but {} leaves reachable",
                self.num_leaves,
                self.root.leaves()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitChoice {
    pub feature_index: usize,
    pub threshold: f64,
    pub default_goes_left: bool,
    pub gain: f64,
}

/// Threshold strictly above `lo` and at most `hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo {
        mid
    } else {
        hi
    }
}

struct Grower<'a> {
    x: &'a [Vec<Option<f64>>],
    g: &'a [f64],
    h: &'a [f64],
    params: &'a HyperParams,
    level_features: Vec<Vec<usize>>,
}

impl Grower<'_> {
    fn grow(&self, rows: &[usize], depth: usize) -> TreeNode {
        if depth < self.params.max_depth && depth < self.level_features.len() {
            if let Some(split) = self.best_split(rows, &self.level_features[depth]) {
                let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| {
                    TreeNode::goes_left(
                        self.x[r][split.feature_index],
                        split.threshold,
                        split.default_goes_left,
                    )
                });
                return TreeNode::Split {
                    feature_index: split.feature_index,
                    threshold: split.threshold,
                    default_goes_left: split.default_goes_left,
                    gain: split.gain,
                    left: Box::new(self.grow(&left, depth + 1)),
                    right: Box::new(self.grow(&right, depth + 1)),
                };
            }
        }
        let (g, h) = rows
            .iter()
            .fold((0.0, 0.0), |(g, h), &r| (g + self.g[r], h + self.h[r]));
        let weight = if h + self.params.lambda > 0.0 {
            leaf_weight_unchecked(g, h, self.params.lambda, self.params.alpha)
        } else {
            0.0
        };
        TreeNode::Leaf { weight }
    }

    /// Best split over `features`, scanned in ascending feature index and
    /// threshold order with missing-left tried before missing-right; only a
    /// strictly larger gain replaces the incumbent.
    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<SplitChoice> {
        let (lambda, gamma, mcw) = (
            self.params.lambda,
            self.params.gamma,
            self.params.min_child_weight,
        );
        let mut best: Option<SplitChoice> = None;
        let mut present: Vec<(f64, f64, f64)> = Vec::with_capacity(rows.len());
        for &f in features {
            present.clear();
            let (mut g_miss, mut h_miss) = (0.0, 0.0);
            for &r in rows {
                match self.x[r][f] {
                    Some(v) if !v.is_nan() => present.push((v, self.g[r], self.h[r])),
                    _ => {
                        g_miss += self.g[r];
                        h_miss += self.h[r];
                    }
                }
            }
            if present.len() < 2 {
                continue;
            }
            present.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (g_present, h_present) = present
                .iter()
                .fold((0.0, 0.0), |(g, h), p| (g + p.1, h + p.2));
            let (mut g_prefix, mut h_prefix) = (0.0, 0.0);
            for i in 0..present.len() - 1 {
                g_prefix += present[i].1;
                h_prefix += present[i].2;
                if present[i].0 == present[i + 1].0 {
                    continue;
                }
                let threshold = midpoint(present[i].0, present[i + 1].0);
                for default_goes_left in [true, false] {
                    let (gl, hl, gr, hr) = if default_goes_left {
                        (g_prefix + g_miss, h_prefix + h_miss, g_present - g_prefix, h_present - h_prefix)
                    } else {
                        (g_prefix, h_prefix, g_present - g_prefix + g_miss, h_present - h_prefix + h_miss)
                    };
                    if hl < mcw || hr < mcw || !(hl + lambda > 0.0) || !(hr + lambda > 0.0) {
                        continue;
                    }
                    let gain = split_gain_unchecked(gl, hl, gr, hr, lambda, gamma);
                    if best.is_none_or(|b| gain > b.gain) {
                        best = Some(SplitChoice {
                            feature_index: f,
                            threshold,
                            default_goes_left,
                            gain,
                        });
                    }
                }
            }
        }
        best.filter(|b| b.gain > 0.0)
    }
}

/// Grows one regression tree on `rows` of `x` by exact greedy search.
///
/// `g` and `h` are indexed like the rows of `x`. Draws from `rng`, in
/// order: the row subsample, the per-tree feature sample, then one feature
/// sample per depth level.
pub fn grow_tree(
    rows: &[usize],
    x: &[Vec<Option<f64>>],
    g: &[f64],
    h: &[f64],
    params: &HyperParams,
    rng: &mut TrainRng,
) -> Result<RegressionTree, GbtError> {
    params.validate()?;
    for len in [g.len(), h.len()] {
        if len != x.len() {
            return Err(GbtError::LengthMismatch {
                expected: x.len(),
                found: len,
            });
        }
    }
    if rows.is_empty() {
        return Err(GbtError::Empty);
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= x.len()) {
        return Err(GbtError::LengthMismatch {
            expected: x.len(),
            found: r + 1,
        });
    }
    let n_features = x[rows[0]].len();
    if let Some(row) = rows.iter().find(|&&r| x[r].len() != n_features) {
        return Err(GbtError::ArityMismatch {
            expected: n_features,
            found: x[*row].len(),
        });
    }

    let rows = sample_sorted(rows, params.subsample, rng);
    let all_features: Vec<usize> = (0..n_features).collect();
    let tree_features = if n_features == 0 {
        Vec::new()
    } else {
        sample_sorted(&all_features, params.colsample_bytree, rng)
    };
    // every split leaves both children non-empty, so depth < #rows
    let levels = params.max_depth.min(rows.len());
    let level_features = (0..levels)
        .map(|_| {
            if tree_features.is_empty() {
                Vec::new()
            } else {
                sample_sorted(&tree_features, params.colsample_bylevel, rng)
            }
        })
        .collect();

    let grower = Grower {
        x,
        g,
        h,
        params,
        level_features,
    };
    Ok(RegressionTree::from_root(grower.grow(&rows, 0)))
}
