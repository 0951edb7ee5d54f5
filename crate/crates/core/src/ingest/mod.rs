//! Input parsing, wave pooling, domain filtering and the TF-IDF ratings matrix.

mod load;
mod ratings;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use load::{
    assemble_panel, load_panel, normalize_domain, parse_timestamp, read_scores, read_slants,
    read_survey, read_traffic,
};
pub use ratings::{build_ratings, split, RatingCell, RatingsMatrix, Split, SplitMode};

/// Default minimum number of distinct visitors a domain needs to be kept.
pub const DEFAULT_MIN_VISITORS: usize = 30;

/// Reliability threshold: scores at or above it are trustworthy.
pub const TRUST_THRESHOLD: f64 = 60.0;

/// One row of a traffic file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficRecord {
    pub user_id: String,
    pub domain: String,
    /// UTC seconds; only needed for the longitudinal split.
    pub timestamp: Option<i64>,
    pub pageviews: u64,
}

/// One row of the survey file; partisanship on the 1 (strong Democrat) to
/// 7 (strong Republican) scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub user_id: String,
    pub partisanship: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Green,
    Red,
    Satire,
    Platform,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Green => "green",
            Category::Red => "red",
            Category::Satire => "satire",
            Category::Platform => "platform",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "green" => Ok(Category::Green),
            "red" => Ok(Category::Red),
            "satire" => Ok(Category::Satire),
            "platform" => Ok(Category::Platform),
            other => Err(Error::invalid(format!("unknown category {other:?}"))),
        }
    }
}

/// Reliability score of one domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub score: f64,
    pub category: Category,
}

impl ScoreRecord {
    pub fn new(score: f64, category: Category) -> Result<Self> {
        if !(0.0..=100.0).contains(&score) {
            return Err(Error::invalid(format!("score {score} outside [0, 100]")));
        }
        match category {
            Category::Green if score < TRUST_THRESHOLD => Err(Error::invalid(format!(
                "green domain with score {score} below {TRUST_THRESHOLD}"
            ))),
            Category::Red if score >= TRUST_THRESHOLD => Err(Error::invalid(format!(
                "red domain with score {score} at or above {TRUST_THRESHOLD}"
            ))),
            _ => Ok(ScoreRecord { score, category }),
        }
    }

    /// Green and Red domains are news sources; Satire and Platform are not
    /// and never enter reliability computations.
    pub fn is_news(&self) -> bool {
        matches!(self.category, Category::Green | Category::Red)
    }

    pub fn is_trustworthy(&self) -> bool {
        self.score >= TRUST_THRESHOLD
    }

    /// The score if this is a news domain.
    pub fn news_score(&self) -> Option<f64> {
        self.is_news().then_some(self.score)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: String,
    pub partisanship: u8,
}

/// Pooled pageviews of one user on one domain, summed over waves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageviewCell {
    pub user: u32,
    pub domain: u32,
    pub pageviews: u64,
}

/// A time-resolved traffic event after filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub user: u32,
    pub domain: u32,
    pub timestamp: Option<i64>,
    pub pageviews: u64,
}

/// The filtered, pooled panel.
///
/// Users and domains are sorted by identifier and referred to by index
/// everywhere else, so index order doubles as the identifier tie-break.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    pub min_visitors: usize,
    pub users: Vec<User>,
    pub domains: Vec<String>,
    /// Sorted by (user, domain).
    pub cells: Vec<PageviewCell>,
    /// Sorted by (user, domain, timestamp).
    pub visits: Vec<Visit>,
    /// Aligned with `domains`.
    pub scores: Vec<Option<ScoreRecord>>,
    /// Aligned with `domains`; external slant in [-2, 2].
    pub slants: Vec<Option<f64>>,
    pub dropped_users_without_survey: usize,
}

impl PanelDataset {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_domains(&self) -> usize {
        self.domains.len()
    }

    pub fn domain_index(&self, domain: &str) -> Option<u32> {
        self.domains
            .binary_search_by(|d| d.as_str().cmp(domain))
            .ok()
            .map(|i| i as u32)
    }

    pub fn user_index(&self, user_id: &str) -> Option<u32> {
        self.users
            .binary_search_by(|u| u.id.as_str().cmp(user_id))
            .ok()
            .map(|i| i as u32)
    }

    /// Reliability score of a Green/Red domain.
    pub fn news_score(&self, domain: u32) -> Option<f64> {
        self.scores[domain as usize].and_then(|s| s.news_score())
    }

    /// Scores of news domains aligned with `domains`, `None` elsewhere.
    pub fn news_scores(&self) -> Vec<Option<f64>> {
        (0..self.domains.len() as u32)
            .map(|d| self.news_score(d))
            .collect()
    }

    pub fn total_pageviews(&self) -> u64 {
        self.cells.iter().map(|c| c.pageviews).sum()
    }

    pub fn has_timestamps(&self) -> bool {
        !self.visits.is_empty() && self.visits.iter().all(|v| v.timestamp.is_some())
    }

    pub fn has_slants(&self) -> bool {
        self.slants.iter().any(Option::is_some)
    }

    /// Distinct visitors per domain over the whole panel.
    pub fn visitor_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.domains.len()];
        for c in &self.cells {
            counts[c.domain as usize] += 1;
        }
        counts
    }

    /// Pooled pageviews per domain over the whole panel.
    pub fn pageview_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.domains.len()];
        for c in &self.cells {
            totals[c.domain as usize] += c.pageviews;
        }
        totals
    }

    /// Cells of one user; `cells` is sorted so this is a contiguous slice.
    pub fn user_cells(&self, user: u32) -> &[PageviewCell] {
        let start = self.cells.partition_point(|c| c.user < user);
        let end = self.cells.partition_point(|c| c.user <= user);
        &self.cells[start..end]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
