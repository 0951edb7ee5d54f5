use log::warn;
use serde::{Deserialize, Serialize};

use super::{ols_standardized, partial_correlation, pearson, Correlation};
use crate::diversity::{evaluate, profile_domains, Level, Metric, MIDPOINT};
use crate::error::{Error, Result};
use crate::ingest::PanelDataset;

/// Audience and popularity variables of one news domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainObservation {
    pub domain: u32,
    pub reliability: f64,
    pub log_users: f64,
    pub log_pageviews: f64,
    pub mean_partisanship: f64,
    pub extremity: f64,
    /// Indexed like [`Metric::ALL`] × `[User, Pageview]`.
    pub diversity: Vec<f64>,
    pub republican_audience: bool,
    pub slant: Option<f64>,
}

impl DomainObservation {
    pub fn diversity(&self, metric: Metric, level: Level) -> f64 {
        self.diversity[diversity_index(metric, level)]
    }
}

fn diversity_index(metric: Metric, level: Level) -> usize {
    let m = Metric::ALL.iter().position(|&x| x == metric).unwrap();
    2 * m + usize::from(level == Level::Pageview)
}

/// One observation per Green/Red domain, from whole-panel audiences.
pub fn domain_observations(panel: &PanelDataset) -> Result<Vec<DomainObservation>> {
    let profiles = profile_domains(panel, None);
    let visitors = panel.visitor_counts();
    let pageviews = panel.pageview_totals();
    let mut out = Vec::new();
    for (d, profile) in profiles.iter().enumerate() {
        let (Some(q), Some(profile)) = (panel.news_score(d as u32), profile) else {
            continue;
        };
        let mut diversity = Vec::with_capacity(2 * Metric::ALL.len());
        let mut mean = 0.0;
        for metric in Metric::ALL {
            for level in [Level::User, Level::Pageview] {
                let v = evaluate(profile, metric, level)?;
                if metric == Metric::Variance && level == Level::User {
                    mean = v.mean_partisanship;
                }
                diversity.push(v.value);
            }
        }
        out.push(DomainObservation {
            domain: d as u32,
            reliability: q,
            log_users: (visitors[d] as f64).ln(),
            log_pageviews: (pageviews[d] as f64).ln(),
            mean_partisanship: mean,
            extremity: (mean - MIDPOINT).abs(),
            diversity,
            republican_audience: mean > MIDPOINT,
            slant: panel.slants[d],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub analysis: String,
    pub x: String,
    pub y: String,
    pub control: Option<String>,
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

fn push_row(
    rows: &mut Vec<CorrelationRow>,
    analysis: &str,
    x: &str,
    y: &str,
    control: Option<&str>,
    c: Result<Correlation>,
) {
    match c {
        Ok(c) => rows.push(CorrelationRow {
            analysis: analysis.to_string(),
            x: x.to_string(),
            y: y.to_string(),
            control: control.map(str::to_string),
            r: c.r,
            p: c.p,
            n: c.n,
        }),
        Err(e) => warn!("skipping {analysis} {x} ~ {y}: {e}"),
    }
}

fn column(obs: &[&DomainObservation], f: impl Fn(&DomainObservation) -> f64) -> Vec<f64> {
    obs.iter().map(|o| f(o)).collect()
}

/// Popularity and diversity correlations with reliability.
///
/// Popularity rows also come split by audience lean; domains whose mean
/// partisanship is exactly the midpoint sit in neither half.
pub fn correlation_report(obs: &[DomainObservation]) -> Vec<CorrelationRow> {
    let mut rows = Vec::new();
    let all: Vec<&DomainObservation> = obs.iter().collect();
    let dem: Vec<&DomainObservation> = obs.iter().filter(|o| o.mean_partisanship < MIDPOINT).collect();
    let rep: Vec<&DomainObservation> = obs.iter().filter(|o| o.mean_partisanship > MIDPOINT).collect();
    for (name, set) in [("popularity", &all), ("popularity_democratic", &dem), ("popularity_republican", &rep)] {
        let q = column(set, |o| o.reliability);
        let lu = column(set, |o| o.log_users);
        let lp = column(set, |o| o.log_pageviews);
        push_row(&mut rows, name, "log_users", "reliability", None, pearson(&lu, &q));
        push_row(&mut rows, name, "log_pageviews", "reliability", None, pearson(&lp, &q));
    }
    let q = column(&all, |o| o.reliability);
    let mean = column(&all, |o| o.mean_partisanship);
    let ext = column(&all, |o| o.extremity);
    for metric in Metric::ALL {
        for level in [Level::User, Level::Pageview] {
            let x = format!("{metric}_{level}");
            let d = column(&all, |o| o.diversity(metric, level));
            push_row(&mut rows, "diversity", &x, "reliability", None, pearson(&d, &q));
            push_row(
                &mut rows,
                "diversity",
                &x,
                "reliability",
                Some("mean_partisanship"),
                partial_correlation(&d, &q, &mean),
            );
            push_row(
                &mut rows,
                "diversity",
                &x,
                "reliability",
                Some("extremity"),
                partial_correlation(&d, &q, &ext),
            );
            let (pop_name, pop) = match level {
                Level::User => ("log_users", column(&all, |o| o.log_users)),
                Level::Pageview => ("log_pageviews", column(&all, |o| o.log_pageviews)),
            };
            push_row(&mut rows, "diversity_popularity", &x, pop_name, None, pearson(&d, &pop));
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub model: String,
    pub term: String,
    pub beta: f64,
    pub se: f64,
    pub p: f64,
    pub r2: f64,
    pub n: usize,
}

/// Standardized regressions of reliability on popularity and on each
/// diversity measure with a Republican-audience interaction.
pub fn regression_report(obs: &[DomainObservation]) -> Result<Vec<RegressionRow>> {
    if obs.is_empty() {
        return Err(Error::invalid("no scored news domains to analyse"));
    }
    let q: Vec<f64> = obs.iter().map(|o| o.reliability).collect();
    let lu: Vec<f64> = obs.iter().map(|o| o.log_users).collect();
    let lp: Vec<f64> = obs.iter().map(|o| o.log_pageviews).collect();
    let rep: Vec<f64> = obs.iter().map(|o| f64::from(u8::from(o.republican_audience))).collect();
    let mut models: Vec<(String, Vec<(String, Vec<f64>)>)> = vec![
        ("popularity_user".into(), vec![("log_users".into(), lu)]),
        ("popularity_pageview".into(), vec![("log_pageviews".into(), lp)]),
    ];
    for metric in Metric::ALL {
        for level in [Level::User, Level::Pageview] {
            let d: Vec<f64> = obs.iter().map(|o| o.diversity(metric, level)).collect();
            let inter: Vec<f64> = d.iter().zip(&rep).map(|(a, b)| a * b).collect();
            models.push((
                format!("{metric}_{level}"),
                vec![
                    ("diversity".into(), d),
                    ("republican".into(), rep.clone()),
                    ("diversity_x_republican".into(), inter),
                ],
            ));
        }
    }
    let mut rows = Vec::new();
    for (name, cols) in &models {
        let preds: Vec<(&str, &[f64])> = cols.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
        match ols_standardized(&q, &preds) {
            Ok(fit) => rows.extend(fit.terms.iter().map(|t| RegressionRow {
                model: name.clone(),
                term: t.name.clone(),
                beta: t.beta,
                se: t.se,
                p: t.p,
                r2: fit.r2,
                n: fit.n,
            })),
            Err(e) => warn!("skipping regression {name}: {e}"),
        }
    }
    Ok(rows)
}
