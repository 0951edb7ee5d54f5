//! End-to-end experiment assembly shared by the binary and the tests.

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diversity::{evaluate, profile_domains, Level, Metric};
use crate::error::{Error, Result};
use crate::evaluation::{bin_over_users, delta_q, DeltaQResult, PerKBin};
use crate::ingest::{split, PanelDataset, SplitMode};
use crate::recommender::{Algorithm, CfModel, LogisticParams, RankedList, UserCandidates, DEFAULT_NEIGHBORS};
use crate::similarity::Kernel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub split: SplitMode,
    pub kernel: Kernel,
    pub n_neighbors: usize,
    pub metric: Metric,
    pub level: Level,
    /// Diversity from training traffic only.
    pub restrict_to_train: bool,
    pub a: f64,
    pub psi: f64,
    /// Logistic location; the mean training diversity when absent.
    pub t: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            split: SplitMode::Random {
                train_fraction: 0.7,
                seed: 0,
            },
            kernel: Kernel::Kendall,
            n_neighbors: DEFAULT_NEIGHBORS,
            metric: Metric::Variance,
            level: Level::User,
            restrict_to_train: true,
            a: 1.0,
            psi: 1.0,
            t: None,
        }
    }
}

/// A fitted CF model with per-user candidates ready for ranking.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: CfModel,
    /// δ per domain; `None` where the audience profile is empty.
    pub diversity: Vec<Option<f64>>,
    pub params: LogisticParams,
    pub popularity: Vec<usize>,
    pub news_scores: Vec<Option<f64>>,
    /// Users with a nonempty candidate set, ascending.
    pub candidates: Vec<UserCandidates>,
}

/// δ per domain under `metric` and `level`.
pub fn domain_diversity(
    panel: &PanelDataset,
    train: Option<&crate::ingest::RatingsMatrix>,
    metric: Metric,
    level: Level,
) -> Result<Vec<Option<f64>>> {
    profile_domains(panel, train)
        .par_iter()
        .map(|p| p.as_ref().map(|p| evaluate(p, metric, level).map(|v| v.value)).transpose())
        .collect()
}

impl Experiment {
    pub fn build(panel: &PanelDataset, cfg: &ExperimentConfig) -> Result<Self> {
        let matrix = split(panel, cfg.split)?;
        let diversity = domain_diversity(
            panel,
            cfg.restrict_to_train.then_some(&matrix),
            cfg.metric,
            cfg.level,
        )?;
        let model = CfModel::new(matrix, cfg.kernel, cfg.n_neighbors)?;
        Self::with_diversity(panel, model, diversity, cfg)
    }

    /// Uses caller-supplied δ values instead of audience diversity.
    pub fn with_diversity(
        panel: &PanelDataset,
        model: CfModel,
        diversity: Vec<Option<f64>>,
        cfg: &ExperimentConfig,
    ) -> Result<Self> {
        if diversity.len() != panel.n_domains() {
            return Err(Error::invalid("diversity vector does not match the panel domains"));
        }
        let t = match cfg.t {
            Some(t) => t,
            None => {
                let known: Vec<f64> = diversity.iter().flatten().copied().collect();
                if known.is_empty() {
                    return Err(Error::Degenerate("no domain has a diversity value".into()));
                }
                known.iter().sum::<f64>() / known.len() as f64
            }
        };
        let params = LogisticParams::new(cfg.a, cfg.psi, t)?;
        let news_scores = panel.news_scores();
        let candidates: Vec<UserCandidates> = (0..panel.n_users() as u32)
            .into_par_iter()
            .map(|u| UserCandidates::collect(&model, u, &news_scores, &diversity, &params))
            .collect::<Vec<_>>()
            .into_iter()
            .filter(|c| !c.is_empty())
            .collect();
        info!(
            "{} users with candidates, logistic location t = {t:.4}",
            candidates.len()
        );
        let popularity = model.popularity();
        Ok(Experiment {
            model,
            diversity,
            params,
            popularity,
            news_scores,
            candidates,
        })
    }

    pub fn lists(&self, algorithm: Algorithm) -> Vec<RankedList> {
        self.candidates
            .iter()
            .map(|c| c.rank(algorithm, &self.popularity))
            .collect()
    }

    pub fn per_k(&self, algorithms: &[Algorithm], k_max: usize, min_bin_users: usize) -> Result<Vec<PerKBin>> {
        let actual = self.lists(Algorithm::ActualVisits);
        let mut out = Vec::new();
        for &a in algorithms {
            out.extend(bin_over_users(&self.lists(a), &actual, &self.news_scores, k_max, min_bin_users)?);
        }
        Ok(out)
    }

    /// ΔQ against actual visits for every user and algorithm.
    pub fn delta_q(&self, algorithms: &[Algorithm], alpha: f64) -> Result<Vec<DeltaQResult>> {
        let actual = self.lists(Algorithm::ActualVisits);
        let mut out = Vec::new();
        for &a in algorithms {
            for (l, b) in self.lists(a).iter().zip(&actual) {
                out.push(delta_q(l, b, &self.news_scores, alpha)?);
            }
        }
        Ok(out)
    }
}
