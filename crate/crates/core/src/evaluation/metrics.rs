use crate::error::{Error, Result};
use crate::ingest::TRUST_THRESHOLD;
use crate::recommender::RankedList;

fn top_scores(list: &RankedList, scores: &[Option<f64>], k: usize) -> Result<Vec<f64>> {
    if list.is_empty() {
        return Err(Error::invalid(format!("empty ranked list for user {}", list.user)));
    }
    let k = k.clamp(1, list.len());
    list.entries[..k]
        .iter()
        .map(|e| {
            scores
                .get(e.domain as usize)
                .copied()
                .flatten()
                .ok_or_else(|| Error::invalid(format!("domain {} in a ranked list has no score", e.domain)))
        })
        .collect()
}

/// Mean reliability score of the top `k` (clipped to the list length).
pub fn trust_mean(list: &RankedList, scores: &[Option<f64>], k: usize) -> Result<f64> {
    let q = top_scores(list, scores, k)?;
    Ok(q.iter().sum::<f64>() / q.len() as f64)
}

/// Share of the top `k` scoring at least 60.
pub fn trust_binary(list: &RankedList, scores: &[Option<f64>], k: usize) -> Result<f64> {
    let q = top_scores(list, scores, k)?;
    Ok(q.iter().filter(|&&s| s >= TRUST_THRESHOLD).count() as f64 / q.len() as f64)
}

fn check_pair(predicted: &RankedList, actual: &RankedList, k: usize) -> Result<()> {
    let mut a: Vec<u32> = predicted.domains().collect();
    let mut b: Vec<u32> = actual.domains().collect();
    a.sort_unstable();
    b.sort_unstable();
    if a != b {
        return Err(Error::invalid(format!(
            "ranked lists for user {} cover different candidate sets",
            predicted.user
        )));
    }
    if k == 0 || k > a.len() {
        return Err(Error::invalid(format!("k = {k} outside 1..={}", a.len())));
    }
    Ok(())
}

/// `|P_k ∩ A_k| / k`.
pub fn precision_at_k(predicted: &RankedList, actual: &RankedList, k: usize) -> Result<f64> {
    check_pair(predicted, actual, k)?;
    let mut top: Vec<u32> = actual.domains().take(k).collect();
    top.sort_unstable();
    let hits = predicted
        .domains()
        .take(k)
        .filter(|d| top.binary_search(d).is_ok())
        .count();
    Ok(hits as f64 / k as f64)
}

/// Rank-aligned RMSE between the top-`k` ratings of both lists.
pub fn rmse_at_k(predicted: &RankedList, actual: &RankedList, k: usize) -> Result<f64> {
    check_pair(predicted, actual, k)?;
    let sse: f64 = predicted.entries[..k]
        .iter()
        .zip(&actual.entries[..k])
        .map(|(p, a)| (p.rating - a.rating).powi(2))
        .sum();
    Ok((sse / k as f64).sqrt())
}

/// Exact weights `L / r^α` when `α` is a small integer and the common
/// multiple stays within the exactly representable integers.
fn integer_weights(k: usize, alpha: f64) -> Option<Vec<u64>> {
    if alpha.fract() != 0.0 || !(0.0..=8.0).contains(&alpha) {
        return None;
    }
    let alpha = alpha as u32;
    let powers: Vec<u64> = (1..=k as u64)
        .map(|r| r.checked_pow(alpha))
        .collect::<Option<_>>()?;
    let mut lcm: u64 = 1;
    for &p in &powers {
        let g = gcd(lcm, p);
        lcm = (lcm / g).checked_mul(p)?;
        if lcm > 1 << 40 {
            return None;
        }
    }
    let weights: Vec<u64> = powers.iter().map(|p| lcm / p).collect();
    let total: u64 = weights.iter().sum();
    (total < 1 << 53).then_some(weights)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `P(r) = r^−α / Σ_h h^−α` for `r = 1..=k`.
pub fn discount_distribution(k: usize, alpha: f64) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid("discount needs k ≥ 1"));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("discount exponent {alpha} must be ≥ 0")));
    }
    if let Some(w) = integer_weights(k, alpha) {
        // numerator and denominator are exact, so each ratio is correctly rounded
        let total = w.iter().sum::<u64>() as f64;
        return Ok(w.into_iter().map(|x| x as f64 / total).collect());
    }
    let raw: Vec<f64> = (1..=k).map(|r| (r as f64).powf(-alpha)).collect();
    let total = neumaier_sum(raw.iter().copied());
    Ok(raw.into_iter().map(|x| x / total).collect())
}

pub(crate) fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Rank-discounted trust difference of `rec` against `baseline` over the
/// first `k = min(|rec|, |baseline|)` ranks.
pub fn delta_q_value(rec: &RankedList, baseline: &RankedList, scores: &[Option<f64>], alpha: f64) -> Result<(f64, usize)> {
    let k = rec.len().min(baseline.len());
    if k == 0 {
        return Err(Error::invalid(format!("empty ranked list for user {}", rec.user)));
    }
    let p = discount_distribution(k, alpha)?;
    let q_rec = top_scores(rec, scores, k)?;
    let q_base = top_scores(baseline, scores, k)?;
    let dq = p
        .iter()
        .zip(q_rec.iter().zip(&q_base))
        .map(|(w, (a, b))| w * (a - b))
        .sum();
    Ok((dq, k))
}
