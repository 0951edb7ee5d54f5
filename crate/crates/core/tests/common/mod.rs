//! Independent reference implementations used by the integration tests.
//! None of these call into the library's numerical code.

#![allow(dead_code)]

use divrec::ingest::{RatingCell, RatingsMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::{digamma, ln_gamma};

/// Kendall τ_b by counting every pair.
pub fn kendall_tau_b_naive(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = (x[i] - x[j]).partial_cmp(&0.0).unwrap() as i64;
            let dy = (y[i] - y[j]).partial_cmp(&0.0).unwrap() as i64;
            if dx == 0 {
                tx += 1;
            }
            if dy == 0 {
                ty += 1;
            }
            match dx * dy {
                1 => conc += 1,
                -1 => disc += 1,
                _ => {}
            }
        }
    }
    let n0 = (n * n.saturating_sub(1) / 2) as i64;
    let den = ((n0 - tx) as f64 * (n0 - ty) as f64).sqrt();
    (den > 0.0).then(|| (conc - disc) as f64 / den)
}

/// Pearson r by the two-pass textbook formula.
pub fn pearson_naive(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

/// Dense train/test matrices as `Option<f64>` grids.
#[derive(Debug, Clone)]
pub struct DenseSplit {
    pub train: Vec<Vec<Option<f64>>>,
    pub test: Vec<Vec<Option<f64>>>,
}

impl DenseSplit {
    pub fn to_matrix(&self) -> RatingsMatrix {
        let rows = |g: &Vec<Vec<Option<f64>>>| -> Vec<Vec<RatingCell>> {
            g.iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter_map(|(d, v)| {
                            v.map(|rating| RatingCell {
                                domain: d as u32,
                                rating,
                                pageviews: 1,
                            })
                        })
                        .collect()
                })
                .collect()
        };
        RatingsMatrix::new(self.train[0].len(), rows(&self.train), rows(&self.test))
    }
}

/// Random sparse matrix; ratings drawn from a small grid so ties are common.
pub fn random_split(seed: u64, n_users: usize, n_domains: usize, density: f64) -> DenseSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = vec![vec![None; n_domains]; n_users];
    let mut test = vec![vec![None; n_domains]; n_users];
    for u in 0..n_users {
        for d in 0..n_domains {
            if rng.gen_bool(density) {
                let v = if rng.gen_bool(0.5) {
                    rng.gen_range(1..6) as f64 * 0.1
                } else {
                    rng.gen_range(0.0..1.0)
                };
                if rng.gen_bool(0.7) {
                    train[u][d] = Some(v);
                } else {
                    test[u][d] = Some(v);
                }
            }
        }
    }
    DenseSplit { train, test }
}

/// User-based CF written directly from the prediction formula:
/// zero-filled training vectors over the domains anyone trained on,
/// `(τ_b + 1)/2` similarity, top-`n` raters of the domain by similarity
/// then index, mean-centred weighted average.
pub fn cf_naive(m: &DenseSplit, user: usize, domain: usize, n: usize) -> Option<f64> {
    let n_users = m.train.len();
    let n_domains = m.train[0].len();
    let universe: Vec<usize> = (0..n_domains)
        .filter(|&d| (0..n_users).any(|u| m.train[u][d].is_some()))
        .collect();
    let vector = |u: usize| -> Vec<f64> { universe.iter().map(|&d| m.train[u][d].unwrap_or(0.0)).collect() };
    let mean = |u: usize| -> Option<f64> {
        let r: Vec<f64> = m.train[u].iter().flatten().copied().collect();
        (!r.is_empty()).then(|| r.iter().sum::<f64>() / r.len() as f64)
    };
    let base = mean(user)?;
    let me = vector(user);
    let mut cands: Vec<(f64, usize)> = (0..n_users)
        .filter(|&v| v != user && m.train[v][domain].is_some())
        .filter_map(|v| kendall_tau_b_naive(&me, &vector(v)).map(|t| ((t + 1.0) / 2.0, v)))
        .collect();
    if cands.is_empty() {
        return None;
    }
    cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    cands.truncate(n);
    let num: f64 = cands
        .iter()
        .map(|&(s, v)| s * (m.train[v][domain].unwrap() - mean(v).unwrap()))
        .sum();
    let den: f64 = cands.iter().map(|c| c.0).sum();
    if den == 0.0 {
        return Some(base);
    }
    Some(base + num / den)
}

fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 8.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x + x2 / 2.0
        + x2 / x * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 * (1.0 / 30.0))))
}

/// NSB posterior mean entropy by a plain trapezoid rule over ln β.
pub fn nsb_naive(h: &[f64]) -> f64 {
    let k = h.len() as f64;
    let n: f64 = h.iter().sum();
    let log_post = |beta: f64| -> f64 {
        let prior = k * trigamma(k * beta + 1.0) - trigamma(beta + 1.0);
        let mut l = prior.ln() + beta.ln() + ln_gamma(k * beta) - ln_gamma(n + k * beta);
        for &x in h {
            if x > 0.0 {
                l += ln_gamma(x + beta) - ln_gamma(beta);
            }
        }
        l
    };
    let mean_s = |beta: f64| -> f64 {
        let a = n + k * beta;
        digamma(a + 1.0)
            - h.iter()
                .map(|&x| (x + beta) / a * digamma(x + beta + 1.0))
                .sum::<f64>()
    };
    let (lo, hi, steps) = (-25.0f64, 25.0f64, 100_000usize);
    let du = (hi - lo) / steps as f64;
    let logs: Vec<f64> = (0..=steps).map(|i| log_post((lo + i as f64 * du).exp())).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (i, l) in logs.iter().enumerate() {
        let w = if i == 0 || i == steps { 0.5 } else { 1.0 } * (l - top).exp();
        num += w * mean_s((lo + i as f64 * du).exp());
        den += w;
    }
    num / den
}

/// Kolmogorov–Smirnov distance of a sample from U(0, 1).
pub fn ks_uniform(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &p)| ((i + 1) as f64 / n - p).max(p - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov tail probability with Stephens' small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for j in 1..=100 {
        let term = 2.0 * (-1f64).powi(j - 1) * (-2.0 * (j as f64 * lambda).powi(2)).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Standard error of the mean with the n − 1 denominator.
pub fn sem(x: &[f64]) -> f64 {
    let m = mean(x);
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0);
    (var / x.len() as f64).sqrt()
}
