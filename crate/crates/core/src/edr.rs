//! Edit Distance on Real sequence (EDR) and EDR-based feature ranking.
//!
//! Two reals match when they lie within `epsilon` of each other. The
//! distance is the minimum number of unit-cost insertions, deletions and
//! mismatched substitutions that align the two sequences:
//!
//! ```text
//! D(i, 0) = i,  D(0, j) = j
//! D(i, j) = min(D(i-1, j-1) + match(i, j), D(i-1, j) + 1, D(i, j-1) + 1)
//! match(i, j) = 0 if |a_i - b_j| <= epsilon else 1
//! ```

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EdrError {
    #[error("EDR epsilon must be a positive finite number, got {0}")]
    InvalidEpsilon(f64),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("requested top {k} of only {available} eligible candidates")]
    NotEnoughCandidates { k: usize, available: usize },
    #[error("candidate {code} has length {found}, target has length {expected}")]
    LengthMismatch {
        code: String,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdrParams {
    epsilon: f64,
}

impl EdrParams {
    /// Match tolerance on z-normalized sequences: a quarter standard deviation.
    pub const DEFAULT_EPSILON: f64 = 0.25;

    pub fn new(epsilon: f64) -> Result<Self, EdrError> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(EdrError::InvalidEpsilon(epsilon));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for EdrParams {
    fn default() -> Self {
        Self {
            epsilon: Self::DEFAULT_EPSILON,
        }
    }
}

/// EDR between `a` and `b`. Runs in O(|a|·|b|) time and O(min) memory.
pub fn edr_distance(a: &[f64], b: &[f64], epsilon: f64) -> Result<usize, EdrError> {
    EdrParams::new(epsilon)?;
    // keep the row over the shorter sequence
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut cur = vec![0usize; short.len() + 1];
    for (i, &x) in long.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &y) in short.iter().enumerate() {
            let subst = prev[j] + usize::from((x - y).abs() > epsilon);
            cur[j + 1] = subst.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[short.len()])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub rank: usize,
    pub indicator_code: String,
    pub distance: usize,
}

/// Candidates ordered by (distance, code), ranks consecutive from 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub entries: Vec<RankedFeature>,
}

impl FeatureRanking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn codes(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.indicator_code.clone()).collect()
    }

    pub fn truncated(&self, k: usize) -> Self {
        Self {
            entries: self.entries.iter().take(k).cloned().collect(),
        }
    }

    /// Writes `rank,indicator_code,indicator_name,edr_distance`. Names are
    /// looked up in `names`; unknown codes get an empty name.
    pub fn write_csv<W: Write>(
        &self,
        names: &BTreeMap<String, String>,
        writer: W,
    ) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["rank", "indicator_code", "indicator_name", "edr_distance"])?;
        for e in &self.entries {
            let name = names.get(&e.indicator_code).map_or("", String::as_str);
            wtr.write_record([
                e.rank.to_string().as_str(),
                &e.indicator_code,
                name,
                &e.distance.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Ranks every candidate against `target`.
pub fn rank_all(
    target: &[f64],
    candidates: &BTreeMap<String, Vec<f64>>,
    params: EdrParams,
) -> Result<FeatureRanking, EdrError> {
    if let Some((code, seq)) = candidates.iter().find(|(_, s)| s.len() != target.len()) {
        return Err(EdrError::LengthMismatch {
            code: code.clone(),
            expected: target.len(),
            found: seq.len(),
        });
    }
    let mut scored: Vec<(usize, &String)> = candidates
        .par_iter()
        .map(|(code, seq)| {
            let d = edr_distance(target, seq, params.epsilon).expect("validated epsilon");
            (d, code)
        })
        .collect();
    scored.sort();
    Ok(FeatureRanking {
        entries: scored
            .into_iter()
            .enumerate()
            .map(|(i, (distance, code))| RankedFeature {
                rank: i + 1,
                indicator_code: code.clone(),
                distance,
            })
            .collect(),
    })
}

/// The `k` candidates closest to `target` in EDR.
pub fn rank_features(
    target: &[f64],
    candidates: &BTreeMap<String, Vec<f64>>,
    params: EdrParams,
    k: usize,
) -> Result<FeatureRanking, EdrError> {
    if k == 0 {
        return Err(EdrError::ZeroK);
    }
    if k > candidates.len() {
        return Err(EdrError::NotEnoughCandidates {
            k,
            available: candidates.len(),
        });
    }
    Ok(rank_all(target, candidates, params)?.truncated(k))
}
