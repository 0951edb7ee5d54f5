use std::fmt;

use serde::{Deserialize, Serialize};

use super::Summary;
use crate::error::{Error, Result};
use crate::ingest::TRUST_THRESHOLD;
use crate::recommender::RankedList;
use crate::stats::welch;

/// Default largest list length, also the Bonferroni factor.
pub const DEFAULT_FAIRNESS_K_MAX: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn of(slant: f64) -> Option<Side> {
        if slant < 0.0 {
            Some(Side::Left)
        } else if slant > 0.0 {
            Some(Side::Right)
        } else {
            None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessRow {
    pub k: usize,
    pub side: Side,
    pub rate: Option<Summary>,
    pub n_users: usize,
    /// Left against right at this `k`; shared by both rows.
    pub welch_t: Option<f64>,
    pub p_raw: Option<f64>,
    pub p_bonferroni: Option<f64>,
}

/// Per-user rate at which trustworthy `side` domains in the CF top-k are
/// missing from the CF+D top-k; `None` when CF's top-k holds none.
fn user_rate(cf: &RankedList, cfd: &RankedList, k: usize, side: Side, scores: &[Option<f64>], slants: &[Option<f64>]) -> Option<f64> {
    let eligible = |d: u32| {
        let d = d as usize;
        let trusted = scores.get(d).copied().flatten().is_some_and(|q| q >= TRUST_THRESHOLD);
        trusted && slants.get(d).copied().flatten().and_then(Side::of) == Some(side)
    };
    let cfd_top: Vec<u32> = cfd.domains().take(k).collect();
    let mut den = 0usize;
    let mut num = 0usize;
    for d in cf.domains().take(k).filter(|&d| eligible(d)) {
        den += 1;
        if !cfd_top.contains(&d) {
            num += 1;
        }
    }
    (den > 0).then(|| num as f64 / den as f64)
}

/// Left/right false-positive rates of CF+D relative to CF for `k = 1..=k_max`,
/// each with a two-sided Welch test Bonferroni-corrected by `k_max`.
///
/// `cf[i]` and `cfd[i]` belong to the same user; users with fewer than `k`
/// candidates are left out at that `k`.
pub fn false_positive_rates(
    cf: &[RankedList],
    cfd: &[RankedList],
    scores: &[Option<f64>],
    slants: &[Option<f64>],
    k_max: usize,
) -> Result<Vec<FairnessRow>> {
    if slants.iter().all(Option::is_none) {
        return Err(Error::invalid("fairness analysis needs domain slants"));
    }
    if cf.len() != cfd.len() {
        return Err(Error::invalid("CF and CF+D list counts differ"));
    }
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let mut rows = Vec::with_capacity(2 * k_max);
    for k in 1..=k_max {
        let mut rates = [Vec::new(), Vec::new()];
        for (a, b) in cf.iter().zip(cfd) {
            if a.user != b.user {
                return Err(Error::invalid("CF and CF+D list users differ"));
            }
            if a.len() < k {
                continue;
            }
            for (i, side) in [Side::Left, Side::Right].into_iter().enumerate() {
                if let Some(r) = user_rate(a, b, k, side, scores, slants) {
                    rates[i].push(r);
                }
            }
        }
        let test = welch(&rates[0], &rates[1]);
        for (i, side) in [Side::Left, Side::Right].into_iter().enumerate() {
            rows.push(FairnessRow {
                k,
                side,
                rate: Summary::of(&rates[i]),
                n_users: rates[i].len(),
                welch_t: test.map(|t| t.t),
                p_raw: test.map(|t| t.p),
                p_bonferroni: test.map(|t| (t.p * k_max as f64).min(1.0)),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recommender::Algorithm;

    #[test]
    fn identical_lists_have_zero_rate() {
        let l = RankedList::from_scored(0, Algorithm::Cf, vec![(0, 3.0), (1, 2.0), (2, 1.0)]);
        let scores = vec![Some(80.0), Some(70.0), Some(90.0)];
        let slants = vec![Some(-1.0), Some(1.0), Some(0.5)];
        let both = std::slice::from_ref(&l);
        let rows = false_positive_rates(both, both, &scores, &slants, 3).unwrap();
        for r in &rows {
            if let Some(s) = r.rate {
                assert_eq!(s.mean, 0.0);
            }
        }
    }

    #[test]
    fn swapped_top_domain() {
        let cf = RankedList::from_scored(0, Algorithm::Cf, vec![(0, 3.0), (1, 2.0)]);
        let cfd = RankedList::from_scored(0, Algorithm::Cfd, vec![(1, 3.0), (0, 2.0)]);
        let scores = vec![Some(80.0), Some(70.0)];
        let slants = vec![Some(-1.0), Some(1.0)];
        let rows = false_positive_rates(&[cf], &[cfd], &scores, &slants, 2).unwrap();
        assert_eq!(rows[0].rate.unwrap().mean, 1.0);
        assert_eq!(rows[1].n_users, 0);
        // full list: both contain everything
        assert_eq!(rows[2].rate.unwrap().mean, 0.0);
        assert_eq!(rows[3].rate.unwrap().mean, 0.0);
        assert!(false_positive_rates(&[], &[], &scores, &[None, None], 2).is_err());
    }
}
