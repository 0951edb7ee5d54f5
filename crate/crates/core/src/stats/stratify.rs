use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{DeltaQResult, Summary};
use crate::ingest::PanelDataset;
use crate::recommender::{Algorithm, CfModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumKey {
    Slant,
    PartyId,
    AbsSlant,
    Activity,
    NDomains,
    NeighborSim,
    BaselineTrust,
}

impl StratumKey {
    pub const ALL: [StratumKey; 7] = [
        StratumKey::Slant,
        StratumKey::PartyId,
        StratumKey::AbsSlant,
        StratumKey::Activity,
        StratumKey::NDomains,
        StratumKey::NeighborSim,
        StratumKey::BaselineTrust,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StratumKey::Slant => "slant",
            StratumKey::PartyId => "party_id",
            StratumKey::AbsSlant => "abs_slant",
            StratumKey::Activity => "activity",
            StratumKey::NDomains => "n_domains",
            StratumKey::NeighborSim => "neighbor_sim",
            StratumKey::BaselineTrust => "baseline_trust",
        }
    }

    pub fn needs_slants(self) -> bool {
        matches!(self, StratumKey::Slant | StratumKey::AbsSlant)
    }
}

impl fmt::Display for StratumKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StratumKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StratumKey::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown stratification key {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub key: StratumKey,
    pub label: String,
    /// Ascending user indices.
    pub members: Vec<u32>,
}

/// Splits users at the 1/3 and 2/3 empirical quantiles; ties go to the
/// lower stratum.
pub fn terciles(values: &[(u32, f64)]) -> Result<[Vec<u32>; 3]> {
    let n = values.len();
    if n < 3 {
        return Err(Error::invalid(format!("terciles need at least 3 users, got {n}")));
    }
    if values.iter().any(|(_, v)| !v.is_finite()) {
        return Err(Error::invalid("non-finite stratification statistic"));
    }
    let mut sorted: Vec<f64> = values.iter().map(|&(_, v)| v).collect();
    sorted.sort_by(f64::total_cmp);
    let q1 = sorted[n.div_ceil(3) - 1];
    let q2 = sorted[(2 * n).div_ceil(3) - 1];
    let mut out: [Vec<u32>; 3] = Default::default();
    for &(u, v) in values {
        let i = if v <= q1 {
            0
        } else if v <= q2 {
            1
        } else {
            2
        };
        out[i].push(u);
    }
    for s in &mut out {
        s.sort_unstable();
    }
    Ok(out)
}

/// Strata for `key` from per-user statistics. Party ID values are the 1..7
/// scale; other keys split into terciles. Empty strata are omitted.
pub fn stratify(key: StratumKey, values: &[(u32, f64)]) -> Result<Vec<Stratum>> {
    if values.len() < 3 {
        return Err(Error::invalid(format!(
            "stratification needs at least 3 users, got {}",
            values.len()
        )));
    }
    let (groups, labels): ([Vec<u32>; 3], [&str; 3]) = if key == StratumKey::PartyId {
        let mut g: [Vec<u32>; 3] = Default::default();
        for &(u, v) in values {
            let i = match v {
                v if (1.0..=3.0).contains(&v) => 0,
                v if v == 4.0 => 1,
                v if (5.0..=7.0).contains(&v) => 2,
                _ => return Err(Error::invalid(format!("party ID {v} outside 1..7"))),
            };
            g[i].push(u);
        }
        for s in &mut g {
            s.sort_unstable();
        }
        (g, ["1-3", "4", "5-7"])
    } else {
        (terciles(values)?, ["low", "middle", "high"])
    };
    Ok(groups
        .into_iter()
        .zip(labels)
        .filter(|(m, _)| !m.is_empty())
        .map(|(members, label)| Stratum {
            key,
            label: label.to_string(),
            members,
        })
        .collect())
}

/// Per-user statistic behind `key`. Users for which it is undefined are
/// absent from the result.
pub fn user_statistic(key: StratumKey, panel: &PanelDataset, model: &CfModel) -> Result<Vec<(u32, f64)>> {
    if key.needs_slants() && !panel.has_slants() {
        return Err(Error::invalid(format!("stratification key {key} needs domain slants")));
    }
    let matrix = model.matrix();
    let scores = panel.news_scores();
    let stat = |u: u32| -> Option<f64> {
        match key {
            StratumKey::Slant | StratumKey::AbsSlant => {
                let s: Vec<f64> = panel
                    .user_cells(u)
                    .iter()
                    .filter_map(|c| panel.slants[c.domain as usize])
                    .collect();
                if s.is_empty() {
                    return None;
                }
                let m = s.iter().sum::<f64>() / s.len() as f64;
                Some(if key == StratumKey::AbsSlant { m.abs() } else { m })
            }
            StratumKey::PartyId => Some(panel.users[u as usize].partisanship as f64),
            StratumKey::Activity => Some(
                matrix
                    .train(u)
                    .iter()
                    .chain(matrix.test(u))
                    .map(|c| c.rating)
                    .sum(),
            ),
            StratumKey::NDomains => Some(panel.user_cells(u).len() as f64),
            StratumKey::NeighborSim => model.table().mean_top_similarity(u, model.n_neighbors()),
            StratumKey::BaselineTrust => {
                let q: Vec<f64> = matrix
                    .train(u)
                    .iter()
                    .filter_map(|c| scores[c.domain as usize])
                    .collect();
                (!q.is_empty()).then(|| q.iter().sum::<f64>() / q.len() as f64)
            }
        }
    };
    Ok((0..panel.n_users() as u32)
        .filter_map(|u| stat(u).map(|v| (u, v)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumDeltaQ {
    pub key: StratumKey,
    pub stratum: String,
    pub algorithm: Algorithm,
    pub mean_delta_q: f64,
    /// `None` for a single-user stratum.
    pub sem: Option<f64>,
    pub n_users: usize,
}

/// Mean ΔQ and its standard error per stratum and algorithm.
pub fn stratified_delta_q(strata: &[Stratum], results: &[DeltaQResult]) -> Result<Vec<StratumDeltaQ>> {
    let mut by_algo: BTreeMap<Algorithm, BTreeMap<u32, f64>> = BTreeMap::new();
    for r in results {
        by_algo.entry(r.algorithm).or_default().insert(r.user, r.delta_q);
    }
    let mut rows = Vec::new();
    for s in strata {
        if s.members.is_empty() {
            return Err(Error::invalid(format!("empty stratum {} {}", s.key, s.label)));
        }
        for (&algorithm, values) in &by_algo {
            let v: Vec<f64> = s.members.iter().filter_map(|u| values.get(u).copied()).collect();
            if let Some(sum) = Summary::of(&v) {
                rows.push(StratumDeltaQ {
                    key: s.key,
                    stratum: s.label.clone(),
                    algorithm,
                    mean_delta_q: sum.mean,
                    sem: sum.se,
                    n_users: v.len(),
                });
            }
        }
    }
    Ok(rows)
}
