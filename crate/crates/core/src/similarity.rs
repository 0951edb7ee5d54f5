//! User–user similarity over training row vectors.
//!
//! Row vectors are dense over the training universe with zeros for domains a
//! user did not visit in training. Similarity is a correlation mapped onto
//! [0, 1] as `(ρ + 1) / 2`; a pair where either vector is constant has no
//! similarity and never enters a neighborhood.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RatingsMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Kendall,
    Pearson,
}

impl Kernel {
    pub fn as_str(self) -> &'static str {
        match self {
            Kernel::Kendall => "kendall",
            Kernel::Pearson => "pearson",
        }
    }

    pub fn similarity(self, x: &[f64], y: &[f64]) -> Option<f64> {
        match self {
            Kernel::Kendall => kendall_sim(x, y),
            Kernel::Pearson => pearson_sim(x, y),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kendall" => Ok(Kernel::Kendall),
            "pearson" => Ok(Kernel::Pearson),
            _ => Err(Error::invalid(format!("unknown similarity kernel {s:?}"))),
        }
    }
}

/// Ordered set of domains with at least one training rating.
#[derive(Debug, Clone, PartialEq)]
pub struct Universe {
    domains: Vec<u32>,
    position: Vec<Option<u32>>,
}

impl Universe {
    pub fn from_training(matrix: &RatingsMatrix) -> Self {
        let mut seen = vec![false; matrix.n_domains()];
        for u in 0..matrix.n_users() as u32 {
            for c in matrix.train(u) {
                seen[c.domain as usize] = true;
            }
        }
        let domains: Vec<u32> = (0..matrix.n_domains() as u32)
            .filter(|&d| seen[d as usize])
            .collect();
        let mut position = vec![None; matrix.n_domains()];
        for (i, &d) in domains.iter().enumerate() {
            position[d as usize] = Some(i as u32);
        }
        Universe { domains, position }
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn domains(&self) -> &[u32] {
        &self.domains
    }

    pub fn position(&self, domain: u32) -> Option<usize> {
        self.position
            .get(domain as usize)
            .copied()
            .flatten()
            .map(|p| p as usize)
    }
}

/// Dense training vector of `user` over `universe`.
pub fn user_vector(matrix: &RatingsMatrix, user: u32, universe: &Universe) -> Result<Vec<f64>> {
    if user as usize >= matrix.n_users() {
        return Err(Error::invalid(format!("unknown user index {user}")));
    }
    let mut v = vec![0.0; universe.len()];
    for c in matrix.train(user) {
        if let Some(p) = universe.position(c.domain) {
            v[p] = c.rating;
        }
    }
    Ok(v)
}

/// Dense ranks (ties share a rank) preserving the order of `x`.
fn dense_ranks(x: &[f64]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..x.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| x[a as usize].total_cmp(&x[b as usize]));
    let mut ranks = vec![0u32; x.len()];
    let mut rank = 0u32;
    for i in 0..order.len() {
        if i > 0 && x[order[i] as usize] != x[order[i - 1] as usize] {
            rank += 1;
        }
        ranks[order[i] as usize] = rank;
    }
    ranks
}

fn tied_pairs(sorted: impl Iterator<Item = u64>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev = None;
    for v in sorted {
        if Some(v) == prev {
            run += 1;
        } else {
            total += run * (run.saturating_sub(1)) / 2;
            run = 1;
            prev = Some(v);
        }
    }
    total + run * run.saturating_sub(1) / 2
}

/// Bottom-up merge sort of `v`, returning the number of strict inversions.
fn sort_counting_inversions(v: &mut Vec<u32>, buf: &mut Vec<u32>) -> u64 {
    let n = v.len();
    buf.clear();
    buf.resize(n, 0);
    let mut swaps = 0u64;
    let mut width = 1;
    while width < n {
        let mut start = 0;
        while start < n {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            let (mut i, mut j, mut k) = (start, mid, start);
            while i < mid && j < end {
                if v[j] < v[i] {
                    buf[k] = v[j];
                    swaps += (mid - i) as u64;
                    j += 1;
                } else {
                    buf[k] = v[i];
                    i += 1;
                }
                k += 1;
            }
            buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
            k += mid - i;
            buf[k..k + (end - j)].copy_from_slice(&v[j..end]);
            start = end;
        }
        std::mem::swap(v, buf);
        width *= 2;
    }
    swaps
}

/// Tie-corrected Kendall τ_b on rank vectors in O(n log n).
///
/// `None` when either vector is entirely tied.
pub fn kendall_tau_b_ranks(rx: &[u32], ry: &[u32]) -> Option<f64> {
    assert_eq!(rx.len(), ry.len(), "vectors must have equal length");
    let n = rx.len() as u64;
    if n < 2 {
        return None;
    }
    let mut keys: Vec<u64> = rx
        .iter()
        .zip(ry)
        .map(|(&a, &b)| ((a as u64) << 32) | b as u64)
        .collect();
    keys.sort_unstable();
    let x_ties = tied_pairs(keys.iter().map(|k| k >> 32));
    let joint_ties = tied_pairs(keys.iter().copied());
    let mut ys: Vec<u32> = keys.iter().map(|k| *k as u32).collect();
    let mut buf = Vec::new();
    let discordant = sort_counting_inversions(&mut ys, &mut buf);
    let y_ties = tied_pairs(ys.iter().map(|&y| y as u64));
    let total = n * (n - 1) / 2;
    if x_ties == total || y_ties == total {
        return None;
    }
    let s = total as f64 - x_ties as f64 - y_ties as f64 + joint_ties as f64 - 2.0 * discordant as f64;
    let denom = ((total - x_ties) as f64).sqrt() * ((total - y_ties) as f64).sqrt();
    Some((s / denom).clamp(-1.0, 1.0))
}

pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "vectors must have equal length");
    kendall_tau_b_ranks(&dense_ranks(x), &dense_ranks(y))
}

/// `(τ_b + 1) / 2`.
pub fn kendall_sim(x: &[f64], y: &[f64]) -> Option<f64> {
    kendall_tau_b(x, y).map(|t| (t + 1.0) / 2.0)
}

/// Pearson correlation; `None` for a zero-variance vector.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "vectors must have equal length");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// `(r + 1) / 2`.
pub fn pearson_sim(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson_r(x, y).map(|r| (r + 1.0) / 2.0)
}

/// Full symmetric user × user similarity table for one kernel and split.
/// Undefined pairs are stored as NaN.
#[derive(Debug, Clone)]
pub struct SimilarityTable {
    kernel: Kernel,
    n: usize,
    values: Vec<f64>,
}

impl SimilarityTable {
    pub fn build(matrix: &RatingsMatrix, kernel: Kernel) -> Self {
        let universe = Universe::from_training(matrix);
        let n = matrix.n_users();
        let vectors: Vec<Vec<f64>> = (0..n as u32)
            .map(|u| user_vector(matrix, u, &universe).expect("index in range"))
            .collect();
        let ranks: Vec<Vec<u32>> = match kernel {
            Kernel::Kendall => vectors.iter().map(|v| dense_ranks(v)).collect(),
            Kernel::Pearson => Vec::new(),
        };
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|u| {
                (u + 1..n)
                    .map(|v| {
                        let s = match kernel {
                            Kernel::Kendall => kendall_tau_b_ranks(&ranks[u], &ranks[v])
                                .map(|t| (t + 1.0) / 2.0),
                            Kernel::Pearson => pearson_sim(&vectors[u], &vectors[v]),
                        };
                        s.unwrap_or(f64::NAN)
                    })
                    .collect()
            })
            .collect();
        let mut values = vec![f64::NAN; n * n];
        for (u, row) in rows.into_iter().enumerate() {
            for (off, s) in row.into_iter().enumerate() {
                let v = u + 1 + off;
                values[u * n + v] = s;
                values[v * n + u] = s;
            }
        }
        for u in 0..n {
            // a user is maximally similar to itself unless its vector is constant
            let self_sim = match kernel {
                Kernel::Kendall => kendall_tau_b_ranks(
                    ranks.get(u).map(Vec::as_slice).unwrap_or(&[]),
                    ranks.get(u).map(Vec::as_slice).unwrap_or(&[]),
                ),
                Kernel::Pearson => pearson_r(&vectors[u], &vectors[u]),
            };
            values[u * n + u] = self_sim.map(|_| 1.0).unwrap_or(f64::NAN);
        }
        SimilarityTable { kernel, n, values }
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn n_users(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: u32, b: u32) -> Option<f64> {
        let s = self.values[a as usize * self.n + b as usize];
        (!s.is_nan()).then_some(s)
    }

    /// Mean similarity to the `n` most similar other users; `None` if the
    /// user has no defined similarity.
    pub fn mean_top_similarity(&self, user: u32, n: usize) -> Option<f64> {
        let mut sims: Vec<(f64, u32)> = (0..self.n as u32)
            .filter(|&v| v != user)
            .filter_map(|v| self.get(user, v).map(|s| (s, v)))
            .collect();
        if sims.is_empty() || n == 0 {
            return None;
        }
        sims.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        sims.truncate(n);
        Some(sims.iter().map(|s| s.0).sum::<f64>() / sims.len() as f64)
    }

    /// Writes the `user_a,user_b,kernel,sim` audit dump (defined pairs, a < b).
    pub fn write_csv<W: std::io::Write>(&self, user_ids: &[String], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["user_a", "user_b", "kernel", "sim"])?;
        for a in 0..self.n as u32 {
            for b in a + 1..self.n as u32 {
                if let Some(s) = self.get(a, b) {
                    w.write_record([
                        user_ids[a as usize].as_str(),
                        user_ids[b as usize].as_str(),
                        self.kernel.as_str(),
                        &s.to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<similarity>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub user: u32,
    pub sim: f64,
}

/// Users who rated `domain` in training, per domain, ascending.
pub fn raters_by_domain(matrix: &RatingsMatrix) -> Vec<Vec<u32>> {
    let mut raters = vec![Vec::new(); matrix.n_domains()];
    for u in 0..matrix.n_users() as u32 {
        for c in matrix.train(u) {
            raters[c.domain as usize].push(u);
        }
    }
    raters
}

/// The `n` most similar users to `user` among `raters` (excluding `user`),
/// by similarity descending then user index ascending.
pub fn top_neighbors(table: &SimilarityTable, user: u32, raters: &[u32], n: usize) -> Vec<Neighbor> {
    let mut out: Vec<Neighbor> = raters
        .iter()
        .filter(|&&v| v != user)
        .filter_map(|&v| table.get(user, v).map(|sim| Neighbor { user: v, sim }))
        .collect();
    out.sort_by(|a, b| b.sim.total_cmp(&a.sim).then(a.user.cmp(&b.user)));
    out.truncate(n);
    out
}

/// Neighborhood of `user` for `domain`: the `n` most similar users with a
/// training rating for `domain`.
pub fn neighbors(
    matrix: &RatingsMatrix,
    table: &SimilarityTable,
    user: u32,
    domain: u32,
    n: usize,
) -> Vec<Neighbor> {
    let raters: Vec<u32> = (0..matrix.n_users() as u32)
        .filter(|&v| matrix.train_rating(v, domain).is_some())
        .collect();
    top_neighbors(table, user, &raters, n)
}
