#![allow(dead_code)]

use num_bigint::BigInt;
use panelcast::gbtree::{HyperParams, RegressionTree, TreeNode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small random split-finding problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub x: Vec<Vec<Option<f64>>>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub params: HyperParams,
}

const VALUES: [f64; 7] = [-1.0, 0.0, 0.5, 1.0, 1.25, 2.5, 3.0];

/// Gradients and hessians are multiples of 1/8, so every partial sum is
/// exact and equal partitions give bit-identical gains in any summation
/// order.
pub fn dyadic_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(2..=8);
    let k = rng.random_range(1..=3);
    let x = (0..n)
        .map(|_| {
            (0..k)
                .map(|_| {
                    if rng.random_bool(0.2) {
                        None
                    } else {
                        Some(VALUES[rng.random_range(0..VALUES.len())])
                    }
                })
                .collect()
        })
        .collect();
    let g = (0..n).map(|_| f64::from(rng.random_range(-24i32..=24)) / 8.0).collect();
    let h = (0..n).map(|_| f64::from(rng.random_range(4i32..=16)) / 8.0).collect();
    let params = HyperParams {
        max_depth: rng.random_range(0..=2),
        lambda: [0.0, 0.5, 1.0, 3.0][rng.random_range(0..4)],
        gamma: [0.0, 0.0, 0.125, 0.5][rng.random_range(0..4)],
        min_child_weight: [0.0, 0.5, 1.0, 2.0][rng.random_range(0..4)],
        alpha: [0.0, 0.25, 1.0][rng.random_range(0..3)],
        subsample: 1.0,
        colsample_bytree: 1.0,
        colsample_bylevel: 1.0,
        ..HyperParams::default()
    };
    Instance { x, g, h, params }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSplit {
    pub feature: usize,
    pub threshold: f64,
    pub default_left: bool,
    pub gain: f64,
}

fn route_left(v: Option<f64>, threshold: f64, default_left: bool) -> bool {
    match v {
        Some(v) => v < threshold,
        None => default_left,
    }
}

fn sums(rows: &[usize], g: &[f64], h: &[f64]) -> (f64, f64) {
    let mut gs = 0.0;
    let mut hs = 0.0;
    for &r in rows {
        gs += g[r];
        hs += h[r];
    }
    (gs, hs)
}

/// Enumerates every (feature, threshold, default side) triple on `rows`
/// and returns the one with the largest regularized gain, scanning features
/// and thresholds in ascending order with the left default first.
pub fn brute_force_split(inst: &Instance, rows: &[usize]) -> Option<OracleSplit> {
    let p = &inst.params;
    let k = inst.x[0].len();
    let mut best: Option<OracleSplit> = None;
    for f in 0..k {
        let mut values: Vec<f64> = rows.iter().filter_map(|&r| inst.x[r][f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let threshold = (w[0] + w[1]) / 2.0;
            for default_left in [true, false] {
                let left: Vec<usize> = rows
                    .iter()
                    .copied()
                    .filter(|&r| route_left(inst.x[r][f], threshold, default_left))
                    .collect();
                let right: Vec<usize> = rows
                    .iter()
                    .copied()
                    .filter(|&r| !route_left(inst.x[r][f], threshold, default_left))
                    .collect();
                let (gl, hl) = sums(&left, &inst.g, &inst.h);
                let (gr, hr) = sums(&right, &inst.g, &inst.h);
                if hl < p.min_child_weight || hr < p.min_child_weight {
                    continue;
                }
                let gain = 0.5
                    * (gl * gl / (hl + p.lambda) + gr * gr / (hr + p.lambda)
                        - (gl + gr) * (gl + gr) / (hl + hr + p.lambda))
                    - p.gamma;
                if best.is_none_or(|b| gain > b.gain) {
                    best = Some(OracleSplit {
                        feature: f,
                        threshold,
                        default_left,
                        gain,
                    });
                }
            }
        }
    }
    best.filter(|b| b.gain > 0.0)
}

/// Minimizer of `G w + ½ (H + λ) w² + α |w|` by case analysis on the sign
/// of `w`.
pub fn oracle_leaf(g: f64, h: f64, lambda: f64, alpha: f64) -> f64 {
    let c = h + lambda;
    // w > 0 branch: derivative G + c w + α = 0
    let pos = -(g + alpha) / c;
    if pos > 0.0 {
        return pos;
    }
    // w < 0 branch: derivative G + c w - α = 0
    let neg = -(g - alpha) / c;
    if neg < 0.0 {
        return neg;
    }
    0.0
}

/// Compares a grown tree against the brute-force oracle node by node.
pub fn check_tree(inst: &Instance, tree: &RegressionTree, tol: f64) -> Result<(), String> {
    let rows: Vec<usize> = (0..inst.x.len()).collect();
    check_node(inst, &tree.root, &rows, 0, tol)
}

fn check_node(inst: &Instance, node: &TreeNode, rows: &[usize], depth: usize, tol: f64) -> Result<(), String> {
    let p = &inst.params;
    let expected = if depth < p.max_depth {
        brute_force_split(inst, rows)
    } else {
        None
    };
    match (node, expected) {
        (TreeNode::Leaf { weight }, None) => {
            let (g, h) = sums(rows, &inst.g, &inst.h);
            let want = oracle_leaf(g, h, p.lambda, p.alpha);
            if (weight - want).abs() > tol {
                return Err(format!("leaf weight {weight} vs oracle {want}"));
            }
            Ok(())
        }
        (
            TreeNode::Split {
                feature_index,
                threshold,
                default_goes_left,
                gain,
                left,
                right,
            },
            Some(o),
        ) => {
            if *feature_index != o.feature
                || *default_goes_left != o.default_left
                || (threshold - o.threshold).abs() > tol
                || (gain - o.gain).abs() > tol
            {
                return Err(format!(
                    "split (f{feature_index}, {threshold}, left={default_goes_left}, gain {gain}) vs oracle {o:?}"
                ));
            }
            let (l, r): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&i| route_left(inst.x[i][o.feature], o.threshold, o.default_left));
            check_node(inst, left, &l, depth + 1, tol)?;
            check_node(inst, right, &r, depth + 1, tol)
        }
        (node, expected) => Err(format!("tree has {node:?}, oracle expects {expected:?}")),
    }
}

/// `x` as an exact integer multiple of 2^-1074, the smallest subnormal.
fn exact_units(x: f64) -> BigInt {
    assert!(x.is_finite());
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as usize;
    let frac = bits & ((1u64 << 52) - 1);
    let (mantissa, shift) = if exp == 0 { (frac, 0) } else { (frac | (1u64 << 52), exp - 1) };
    let v = BigInt::from(mantissa) << shift;
    if x.is_sign_negative() {
        -v
    } else {
        v
    }
}

/// Sum of squared residuals of `pred`, computed exactly in units of
/// 2^-2148. Free of the round-off a floating-point sum carries, so it
/// compares the true losses of two f64 prediction vectors.
pub fn sse_exact(y: &[f64], pred: &[f64]) -> BigInt {
    y.iter()
        .zip(pred)
        .map(|(a, b)| {
            let r = exact_units(*a) - exact_units(*b);
            &r * &r
        })
        .sum()
}
