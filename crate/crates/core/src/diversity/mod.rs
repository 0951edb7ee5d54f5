//! Audience partisan diversity of web domains.
//!
//! A domain's audience is summarised by an [`AudienceProfile`]: how many
//! distinct visitors (user level) and how many pageviews (pageview level)
//! fall on each point of the 1..7 partisanship scale. Six estimators turn a
//! profile into a diversity value; see [`Metric`].

pub mod metrics;
pub mod nsb;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{PanelDataset, RatingsMatrix};
use metrics::Histogram;

/// Number of partisanship bins.
pub const BINS: usize = 7;

/// Midpoint of the partisanship scale (a true independent).
pub const MIDPOINT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visitor {
    pub partisanship: u8,
    pub pageviews: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudienceProfile {
    pub domain: String,
    /// Distinct visitors per partisanship bin.
    pub counts: [u64; BINS],
    /// Pageviews per partisanship bin.
    pub weights: [f64; BINS],
    pub visitors: Vec<Visitor>,
}

impl AudienceProfile {
    pub fn new(domain: impl Into<String>) -> Self {
        AudienceProfile {
            domain: domain.into(),
            counts: [0; BINS],
            weights: [0.0; BINS],
            visitors: Vec::new(),
        }
    }

    pub fn from_visitors(domain: impl Into<String>, visitors: impl IntoIterator<Item = Visitor>) -> Result<Self> {
        let mut p = AudienceProfile::new(domain);
        for v in visitors {
            p.push(v)?;
        }
        Ok(p)
    }

    pub fn push(&mut self, v: Visitor) -> Result<()> {
        if !(1..=7).contains(&v.partisanship) {
            return Err(Error::invalid(format!(
                "partisanship {} not in 1..7",
                v.partisanship
            )));
        }
        if !(v.pageviews >= 0.0) || !v.pageviews.is_finite() {
            return Err(Error::invalid("visitor weight must be finite and nonnegative"));
        }
        let bin = (v.partisanship - 1) as usize;
        self.counts[bin] += 1;
        self.weights[bin] += v.pageviews;
        self.visitors.push(v);
        Ok(())
    }

    pub fn n_users(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn n_pageviews(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn histogram(&self, level: Level) -> Histogram {
        match level {
            Level::User => self.counts.map(|c| c as f64),
            Level::Pageview => self.weights,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Variance,
    EntropyMl,
    EntropyDirichlet,
    EntropyNsb,
    CompMaxProb,
    CompGini,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Variance,
        Metric::EntropyMl,
        Metric::EntropyDirichlet,
        Metric::EntropyNsb,
        Metric::CompMaxProb,
        Metric::CompGini,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Variance => "variance",
            Metric::EntropyMl => "entropy_ml",
            Metric::EntropyDirichlet => "entropy_dirichlet",
            Metric::EntropyNsb => "entropy_nsb",
            Metric::CompMaxProb => "comp_max_prob",
            Metric::CompGini => "comp_gini",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown diversity metric {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    User,
    Pageview,
}

impl Level {
    pub const ALL: [Level; 2] = [Level::User, Level::Pageview];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::User => "user",
            Level::Pageview => "pageview",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "user" => Ok(Level::User),
            "pageview" => Ok(Level::Pageview),
            _ => Err(Error::invalid(format!("unknown level {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityValue {
    pub metric: Metric,
    pub level: Level,
    pub value: f64,
    pub mean_partisanship: f64,
    /// |mean − 4|
    pub extremity: f64,
}

/// Default Dirichlet pseudo-count.
pub const DIRICHLET_ALPHA: f64 = 1.0;

/// Evaluates a metric on a raw histogram.
pub fn metric_value(h: &Histogram, metric: Metric) -> Result<f64> {
    match metric {
        Metric::Variance => metrics::variance(h),
        Metric::EntropyMl => metrics::entropy_ml(h),
        Metric::EntropyDirichlet => metrics::entropy_dirichlet(h, DIRICHLET_ALPHA),
        Metric::EntropyNsb => nsb::nsb_entropy(h),
        Metric::CompMaxProb => metrics::comp_max_prob(h),
        Metric::CompGini => metrics::comp_gini(h),
    }
}

fn wrap(profile: &AudienceProfile, metric: Metric, level: Level, value: Result<f64>) -> Result<DiversityValue> {
    let value = value?;
    let mean = metrics::mean_partisanship(&profile.histogram(level))?;
    Ok(DiversityValue {
        metric,
        level,
        value,
        mean_partisanship: mean,
        extremity: (mean - MIDPOINT).abs(),
    })
}

pub fn evaluate(profile: &AudienceProfile, metric: Metric, level: Level) -> Result<DiversityValue> {
    let h = profile.histogram(level);
    wrap(profile, metric, level, metric_value(&h, metric))
}

pub fn variance(profile: &AudienceProfile, level: Level) -> Result<DiversityValue> {
    evaluate(profile, Metric::Variance, level)
}

pub fn entropy_ml(profile: &AudienceProfile, level: Level) -> Result<DiversityValue> {
    evaluate(profile, Metric::EntropyMl, level)
}

pub fn entropy_dirichlet(profile: &AudienceProfile, level: Level, alpha: f64) -> Result<DiversityValue> {
    let h = profile.histogram(level);
    wrap(
        profile,
        Metric::EntropyDirichlet,
        level,
        metrics::entropy_dirichlet(&h, alpha),
    )
}

pub fn entropy_nsb(profile: &AudienceProfile, level: Level) -> Result<DiversityValue> {
    evaluate(profile, Metric::EntropyNsb, level)
}

pub fn comp_max_prob(profile: &AudienceProfile, level: Level) -> Result<DiversityValue> {
    evaluate(profile, Metric::CompMaxProb, level)
}

pub fn comp_gini(profile: &AudienceProfile, level: Level) -> Result<DiversityValue> {
    evaluate(profile, Metric::CompGini, level)
}

/// One audience profile per domain, indexed like `panel.domains`.
///
/// With `train = None` every pooled pageview counts. With a split matrix only
/// training cells count, and domains without training visitors get `None`.
pub fn profile_domains(panel: &PanelDataset, train: Option<&RatingsMatrix>) -> Vec<Option<AudienceProfile>> {
    let mut profiles: Vec<AudienceProfile> = panel
        .domains
        .iter()
        .map(|d| AudienceProfile::new(d.as_str()))
        .collect();
    let mut add = |user: u32, domain: u32, pageviews: u64| {
        let v = Visitor {
            partisanship: panel.users[user as usize].partisanship,
            pageviews: pageviews as f64,
        };
        // partisanship was validated at load
        profiles[domain as usize].push(v).expect("valid visitor");
    };
    match train {
        None => {
            for c in &panel.cells {
                add(c.user, c.domain, c.pageviews);
            }
        }
        Some(m) => {
            for u in 0..m.n_users() as u32 {
                for c in m.train(u) {
                    add(u, c.domain, c.pageviews);
                }
            }
        }
    }
    profiles
        .into_iter()
        .map(|p| (p.n_users() > 0).then_some(p))
        .collect()
}
