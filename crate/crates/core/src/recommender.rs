//! CF and CF+D rating prediction and the four list rankers.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{PanelDataset, RatingsMatrix};
use crate::similarity::{raters_by_domain, top_neighbors, Kernel, Neighbor, SimilarityTable};

/// Default neighborhood size.
pub const DEFAULT_NEIGHBORS: usize = 10;

/// Logistic re-ranking term `g(δ) = a / (1 + exp(−(δ − t)/ψ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub a: f64,
    pub psi: f64,
    pub t: f64,
}

impl LogisticParams {
    pub fn new(a: f64, psi: f64, t: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::invalid(format!("logistic asymptote a = {a} must be positive")));
        }
        if !(psi > 0.0 && psi.is_finite()) {
            return Err(Error::invalid(format!("logistic psi = {psi} must be positive")));
        }
        if !t.is_finite() {
            return Err(Error::invalid(format!("logistic location t = {t} must be finite")));
        }
        Ok(LogisticParams { a, psi, t })
    }

    /// `a = 1`, `ψ = 1` at location `t`.
    pub fn with_location(t: f64) -> Result<Self> {
        Self::new(1.0, 1.0, t)
    }

    pub fn g(&self, delta: f64) -> f64 {
        let z = (delta - self.t) / self.psi;
        if z == 0.0 {
            return self.a / 2.0;
        }
        self.a / (1.0 + (-z).exp())
    }

    /// `g(δ)`, or the neutral `a/2` when the domain has no diversity value.
    pub fn g_or_neutral(&self, delta: Option<f64>) -> f64 {
        delta.map_or(self.a / 2.0, |d| self.g(d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "cf")]
    Cf,
    #[serde(rename = "cfd")]
    Cfd,
    #[serde(rename = "popularity")]
    GlobalPopularity,
    #[serde(rename = "actual")]
    ActualVisits,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Cf,
        Algorithm::Cfd,
        Algorithm::GlobalPopularity,
        Algorithm::ActualVisits,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Cf => "cf",
            Algorithm::Cfd => "cfd",
            Algorithm::GlobalPopularity => "popularity",
            Algorithm::ActualVisits => "actual",
        }
    }

    /// Whether list ratings are predicted ratings comparable with test ratings.
    pub fn predicts_ratings(self) -> bool {
        matches!(self, Algorithm::Cf | Algorithm::Cfd)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cf" => Ok(Algorithm::Cf),
            "cfd" => Ok(Algorithm::Cfd),
            "popularity" => Ok(Algorithm::GlobalPopularity),
            "actual" => Ok(Algorithm::ActualVisits),
            other => Err(Error::invalid(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub domain: u32,
    pub rating: f64,
    /// 1-based.
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub user: u32,
    pub algorithm: Algorithm,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn domains(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|e| e.domain)
    }

    /// Sorts `(domain, rating)` pairs by rating descending, domain ascending.
    pub fn from_scored(user: u32, algorithm: Algorithm, mut scored: Vec<(u32, f64)>) -> Self {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let entries = scored
            .into_iter()
            .enumerate()
            .map(|(i, (domain, rating))| RankedEntry {
                domain,
                rating,
                rank: i as u32 + 1,
            })
            .collect();
        RankedList {
            user,
            algorithm,
            entries,
        }
    }
}

/// User-based CF over a fixed training matrix and similarity table.
#[derive(Debug, Clone)]
pub struct CfModel {
    matrix: RatingsMatrix,
    table: SimilarityTable,
    raters: Vec<Vec<u32>>,
    means: Vec<Option<f64>>,
    n_neighbors: usize,
}

impl CfModel {
    pub fn new(matrix: RatingsMatrix, kernel: Kernel, n_neighbors: usize) -> Result<Self> {
        let table = SimilarityTable::build(&matrix, kernel);
        Self::with_table(matrix, table, n_neighbors)
    }

    pub fn with_table(matrix: RatingsMatrix, table: SimilarityTable, n_neighbors: usize) -> Result<Self> {
        if n_neighbors == 0 {
            return Err(Error::invalid("neighborhood size must be at least 1"));
        }
        if table.n_users() != matrix.n_users() {
            return Err(Error::invalid("similarity table does not match the ratings matrix"));
        }
        let raters = raters_by_domain(&matrix);
        let means = (0..matrix.n_users() as u32)
            .map(|u| {
                let row = matrix.train(u);
                (!row.is_empty()).then(|| row.iter().map(|c| c.rating).sum::<f64>() / row.len() as f64)
            })
            .collect();
        Ok(CfModel {
            matrix,
            table,
            raters,
            means,
            n_neighbors,
        })
    }

    pub fn matrix(&self) -> &RatingsMatrix {
        &self.matrix
    }

    pub fn table(&self) -> &SimilarityTable {
        &self.table
    }

    pub fn n_neighbors(&self) -> usize {
        self.n_neighbors
    }

    /// Mean training rating of `user`, `None` without training cells.
    pub fn user_mean(&self, user: u32) -> Option<f64> {
        self.means.get(user as usize).copied().flatten()
    }

    /// Training distinct-visitor count per domain.
    pub fn popularity(&self) -> Vec<usize> {
        self.raters.iter().map(Vec::len).collect()
    }

    pub fn neighbors(&self, user: u32, domain: u32) -> Vec<Neighbor> {
        match self.raters.get(domain as usize) {
            Some(r) => top_neighbors(&self.table, user, r, self.n_neighbors),
            None => Vec::new(),
        }
    }

    /// CF prediction, `None` when the neighborhood is empty.
    pub fn predict_cf(&self, user: u32, domain: u32) -> Option<f64> {
        if user as usize >= self.matrix.n_users() {
            return None;
        }
        let base = self.user_mean(user)?;
        let nb = self.neighbors(user, domain);
        if nb.is_empty() {
            return None;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for n in &nb {
            let v = self.matrix.train_rating(n.user, domain)?;
            let m = self.user_mean(n.user)?;
            num += n.sim * (v - m);
            den += n.sim;
        }
        if den == 0.0 {
            return Some(base);
        }
        Some(base + num / den)
    }

    pub fn predict_cfd(&self, user: u32, domain: u32, delta: Option<f64>, params: &LogisticParams) -> Option<f64> {
        self.predict_cf(user, domain).map(|r| r + params.g_or_neutral(delta))
    }
}

/// Candidate test domains of one user with everything needed to rank them.
///
/// Parallel vectors; `domains` ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserCandidates {
    pub user: u32,
    pub domains: Vec<u32>,
    pub cf: Vec<f64>,
    pub g: Vec<f64>,
    pub actual: Vec<f64>,
}

impl UserCandidates {
    /// Test domains with a CF prediction and a Green/Red score.
    pub fn collect(
        model: &CfModel,
        user: u32,
        news_scores: &[Option<f64>],
        diversity: &[Option<f64>],
        params: &LogisticParams,
    ) -> Self {
        let mut c = UserCandidates {
            user,
            domains: Vec::new(),
            cf: Vec::new(),
            g: Vec::new(),
            actual: Vec::new(),
        };
        for cell in model.matrix().test(user) {
            let d = cell.domain as usize;
            if news_scores.get(d).copied().flatten().is_none() {
                continue;
            }
            if let Some(p) = model.predict_cf(user, cell.domain) {
                c.domains.push(cell.domain);
                c.cf.push(p);
                c.g.push(params.g_or_neutral(diversity.get(d).copied().flatten()));
                c.actual.push(cell.rating);
            }
        }
        c
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    /// CF+D ranking with an arbitrary re-ranking term per candidate.
    pub fn rank_with_terms(&self, g: &[f64]) -> RankedList {
        let scored = self
            .domains
            .iter()
            .zip(self.cf.iter().zip(g))
            .map(|(&d, (&r, &t))| (d, r + t))
            .collect();
        RankedList::from_scored(self.user, Algorithm::Cfd, scored)
    }

    pub fn rank(&self, algorithm: Algorithm, popularity: &[usize]) -> RankedList {
        let values: Vec<f64> = match algorithm {
            Algorithm::Cf => self.cf.clone(),
            Algorithm::Cfd => return self.rank_with_terms(&self.g),
            Algorithm::GlobalPopularity => self
                .domains
                .iter()
                .map(|&d| popularity[d as usize] as f64)
                .collect(),
            Algorithm::ActualVisits => self.actual.clone(),
        };
        RankedList::from_scored(
            self.user,
            algorithm,
            self.domains.iter().copied().zip(values).collect(),
        )
    }
}

/// Writes `user_id,algorithm,rank,domain,rating` rows.
pub fn write_lists<W: Write>(panel: &PanelDataset, lists: &[RankedList], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user_id", "algorithm", "rank", "domain", "rating"])?;
    for list in lists {
        for e in &list.entries {
            w.write_record([
                panel.users[list.user as usize].id.as_str(),
                list.algorithm.as_str(),
                &e.rank.to_string(),
                panel.domains[e.domain as usize].as_str(),
                &e.rating.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<recommendations>", e))?;
    Ok(())
}
