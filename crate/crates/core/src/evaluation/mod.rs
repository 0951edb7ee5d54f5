//! Offline evaluation of ranked lists.
//!
//! Lists are compared against the user's actual-visits ranking over the same
//! candidate set. Per-k figures average over users holding at least `k`
//! candidates.

mod fairness;
mod metrics;
mod null;

use serde::{Deserialize, Serialize};

pub use fairness::{false_positive_rates, FairnessRow, Side, DEFAULT_FAIRNESS_K_MAX};
pub use metrics::{
    delta_q_value, discount_distribution, precision_at_k, rmse_at_k, trust_binary, trust_mean,
};
pub use null::{resampling_null, NullTestResult};

use crate::error::{Error, Result};
use crate::recommender::{Algorithm, RankedList};

/// Default minimum number of users for a reported per-k bin.
pub const DEFAULT_MIN_BIN_USERS: usize = 100;

/// Mean with standard error of the mean (`None` below two observations).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub se: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = (n > 1).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        });
        Some(Summary { mean, se })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerKBin {
    pub algorithm: Algorithm,
    pub k: usize,
    pub n_users: usize,
    /// Fewer users than the minimum bin size.
    pub below_min: bool,
    pub trust_mean: Summary,
    pub trust_binary: Summary,
    pub precision: Summary,
    /// Only for algorithms that predict ratings.
    pub rmse: Option<Summary>,
}

/// Per-k means over users for one algorithm.
///
/// `lists[i]` and `actual[i]` must belong to the same user. Users with empty
/// lists are skipped. Bins stop at the first `k` no user reaches.
pub fn bin_over_users(
    lists: &[RankedList],
    actual: &[RankedList],
    scores: &[Option<f64>],
    k_max: usize,
    min_bin_users: usize,
) -> Result<Vec<PerKBin>> {
    if lists.len() != actual.len() {
        return Err(Error::invalid("list and baseline counts differ"));
    }
    let Some(algorithm) = lists.first().map(|l| l.algorithm) else {
        return Ok(Vec::new());
    };
    let mut bins = Vec::new();
    for k in 1..=k_max {
        let mut tm = Vec::new();
        let mut tb = Vec::new();
        let mut pr = Vec::new();
        let mut rm = Vec::new();
        for (l, a) in lists.iter().zip(actual) {
            if l.user != a.user {
                return Err(Error::invalid("list and baseline users differ"));
            }
            if l.len() < k {
                continue;
            }
            tm.push(trust_mean(l, scores, k)?);
            tb.push(trust_binary(l, scores, k)?);
            pr.push(precision_at_k(l, a, k)?);
            if algorithm.predicts_ratings() {
                rm.push(rmse_at_k(l, a, k)?);
            }
        }
        if tm.is_empty() {
            break;
        }
        bins.push(PerKBin {
            algorithm,
            k,
            n_users: tm.len(),
            below_min: tm.len() < min_bin_users,
            trust_mean: Summary::of(&tm).unwrap(),
            trust_binary: Summary::of(&tb).unwrap(),
            precision: Summary::of(&pr).unwrap(),
            rmse: Summary::of(&rm),
        });
    }
    Ok(bins)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaQResult {
    pub user: u32,
    pub algorithm: Algorithm,
    pub delta_q: f64,
    pub k: usize,
    pub alpha: f64,
}

/// Expected trust change of `rec` relative to the actual-visits `baseline`.
pub fn delta_q(rec: &RankedList, baseline: &RankedList, scores: &[Option<f64>], alpha: f64) -> Result<DeltaQResult> {
    let (delta_q, k) = delta_q_value(rec, baseline, scores, alpha)?;
    Ok(DeltaQResult {
        user: rec.user,
        algorithm: rec.algorithm,
        delta_q,
        k,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_small_samples() {
        assert!(Summary::of(&[]).is_none());
        assert_eq!(Summary::of(&[2.0]).unwrap().se, None);
        let s = Summary::of(&[1.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.se.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn one_user_three_bins() {
        let l = RankedList::from_scored(0, Algorithm::Cf, vec![(0, 3.0), (1, 2.0), (2, 1.0)]);
        let a = RankedList::from_scored(0, Algorithm::ActualVisits, vec![(0, 3.0), (2, 2.0), (1, 1.0)]);
        let scores = vec![Some(80.0), Some(40.0), Some(60.0)];
        let bins = bin_over_users(&[l], &[a], &scores, 10, 100).unwrap();
        assert_eq!(bins.len(), 3);
        assert!(bins.iter().all(|b| b.n_users == 1 && b.below_min));
        assert_eq!(bins[1].precision.mean, 0.5);
        assert_eq!(bins[2].precision.mean, 1.0);
    }
}
