use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recommender::UserCandidates;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullTestResult {
    pub k: usize,
    pub replicates: usize,
    pub seed: u64,
    pub n_users: usize,
    pub observed_precision: f64,
    /// `(1 + #{replicate ≥ observed}) / (1 + B)`.
    pub p_plus_one: f64,
    /// `#{replicate ≥ observed} / B`.
    pub p_raw: f64,
    pub replicate_precisions: Vec<f64>,
}

/// Candidate indices of the top `k` by `score` descending, domain ascending.
fn top_k(c: &UserCandidates, score: impl Fn(usize) -> f64, k: usize, order: &mut Vec<usize>) {
    order.clear();
    order.extend(0..c.len());
    order.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(c.domains[a].cmp(&c.domains[b])));
    order.truncate(k);
}

struct Prepared<'a> {
    cands: &'a UserCandidates,
    in_actual: Vec<bool>,
}

impl Prepared<'_> {
    fn precision(&self, g: &[f64], k: usize, order: &mut Vec<usize>) -> f64 {
        let c = self.cands;
        top_k(c, |i| c.cf[i] + g[i], k, order);
        order.iter().filter(|&&i| self.in_actual[i]).count() as f64 / k as f64
    }
}

/// Sampling distribution of mean CF+D precision at `k` when each user's
/// re-ranking terms are permuted across their candidates.
///
/// Users with fewer than `k` candidates do not take part. Replicate `b`
/// draws from a ChaCha8 stream `b` under `seed`.
pub fn resampling_null(cands: &[UserCandidates], k: usize, replicates: usize, seed: u64) -> Result<NullTestResult> {
    if k == 0 {
        return Err(Error::invalid("null test needs k ≥ 1"));
    }
    if replicates == 0 {
        return Err(Error::invalid("null test needs at least one replicate"));
    }
    if !cands.iter().any(|c| c.len() >= 2) {
        return Err(Error::invalid("no user has two or more candidates"));
    }
    let mut order = Vec::new();
    let prepared: Vec<Prepared> = cands
        .iter()
        .filter(|c| c.len() >= k)
        .map(|c| {
            top_k(c, |i| c.actual[i], k, &mut order);
            let mut in_actual = vec![false; c.len()];
            for &i in &order {
                in_actual[i] = true;
            }
            Prepared { cands: c, in_actual }
        })
        .collect();
    if prepared.is_empty() {
        return Err(Error::invalid(format!("no user has {k} or more candidates")));
    }
    let n = prepared.len() as f64;
    let observed = prepared
        .iter()
        .map(|p| p.precision(&p.cands.g, k, &mut order))
        .sum::<f64>()
        / n;
    let replicate_precisions: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut order = Vec::new();
            let mut g = Vec::new();
            let mut total = 0.0;
            for p in &prepared {
                g.clear();
                g.extend_from_slice(&p.cands.g);
                g.shuffle(&mut rng);
                total += p.precision(&g, k, &mut order);
            }
            total / n
        })
        .collect();
    let at_least = replicate_precisions.iter().filter(|&&r| r >= observed).count();
    Ok(NullTestResult {
        k,
        replicates,
        seed,
        n_users: prepared.len(),
        observed_precision: observed,
        p_plus_one: (1 + at_least) as f64 / (1 + replicates) as f64,
        p_raw: at_least as f64 / replicates as f64,
        replicate_precisions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(user: u32, cf: &[f64], g: &[f64], actual: &[f64]) -> UserCandidates {
        UserCandidates {
            user,
            domains: (0..cf.len() as u32).collect(),
            cf: cf.to_vec(),
            g: g.to_vec(),
            actual: actual.to_vec(),
        }
    }

    #[test]
    fn equal_terms_reproduce_observed() {
        let c = vec![user(0, &[0.3, 0.1, 0.2], &[0.5; 3], &[0.1, 0.3, 0.2])];
        let r = resampling_null(&c, 1, 50, 3).unwrap();
        assert!(r.replicate_precisions.iter().all(|&p| p == r.observed_precision));
        assert_eq!(r.p_plus_one, 1.0);
        assert_eq!(r.p_raw, 1.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let c = vec![
            user(0, &[0.3, 0.1, 0.2, 0.0], &[0.1, 0.9, 0.4, 0.2], &[0.1, 0.3, 0.2, 0.5]),
            user(1, &[0.2, 0.2, 0.1], &[0.7, 0.3, 0.5], &[0.4, 0.3, 0.2]),
        ];
        let a = resampling_null(&c, 1, 100, 9).unwrap();
        let b = resampling_null(&c, 1, 100, 9).unwrap();
        assert_eq!(a, b);
        assert!(resampling_null(&[user(0, &[1.0], &[0.5], &[1.0])], 1, 10, 0).is_err());
    }
}
