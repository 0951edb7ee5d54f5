//! CSV and JSON report writers.
//!
//! Floats use Rust's shortest round-trip formatting; undefined values are
//! written as empty fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::diversity::{evaluate, AudienceProfile, Level, Metric};
use crate::error::{Error, Result};
use crate::evaluation::{DeltaQResult, FairnessRow, PerKBin, Summary};
use crate::ingest::PanelDataset;
use crate::stats::{CorrelationRow, RegressionRow, StratumDeltaQ};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io("<report>", e.into_error()))?
        .flush()
        .map_err(|e| Error::io("<report>", e))
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn to_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    f(BufWriter::new(file))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    to_file(path, |mut w| {
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    })
}

/// `domain,metric,level,value,mean_partisanship,extremity,n_users,n_pageviews`
pub fn write_diversity<W: Write>(
    profiles: &[Option<AudienceProfile>],
    metrics: &[Metric],
    levels: &[Level],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "domain",
        "metric",
        "level",
        "value",
        "mean_partisanship",
        "extremity",
        "n_users",
        "n_pageviews",
    ])?;
    for p in profiles.iter().flatten() {
        for &m in metrics {
            for &l in levels {
                let v = evaluate(p, m, l)?;
                w.write_record([
                    p.domain.as_str(),
                    m.as_str(),
                    l.as_str(),
                    &v.value.to_string(),
                    &v.mean_partisanship.to_string(),
                    &v.extremity.to_string(),
                    &p.n_users().to_string(),
                    &p.n_pageviews().to_string(),
                ])?;
            }
        }
    }
    finish(w)
}

/// Per-k report; bins below the minimum size are dropped unless `no_cap`.
pub fn write_per_k<W: Write>(bins: &[PerKBin], no_cap: bool, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "algorithm",
        "k",
        "n_users",
        "trust_mean",
        "trust_mean_se",
        "trust_binary",
        "trust_binary_se",
        "precision",
        "precision_se",
        "rmse",
        "rmse_se",
    ])?;
    let pair = |s: Option<Summary>| [opt(s.map(|s| s.mean)), opt(s.and_then(|s| s.se))];
    for b in bins.iter().filter(|b| no_cap || !b.below_min) {
        let [tm, tm_se] = pair(Some(b.trust_mean));
        let [tb, tb_se] = pair(Some(b.trust_binary));
        let [pr, pr_se] = pair(Some(b.precision));
        let [rm, rm_se] = pair(b.rmse);
        w.write_record([
            b.algorithm.as_str(),
            &b.k.to_string(),
            &b.n_users.to_string(),
            &tm,
            &tm_se,
            &tb,
            &tb_se,
            &pr,
            &pr_se,
            &rm,
            &rm_se,
        ])?;
    }
    finish(w)
}

/// `user_id,algorithm,delta_q,k,alpha`
pub fn write_delta_q<W: Write>(panel: &PanelDataset, results: &[DeltaQResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user_id", "algorithm", "delta_q", "k", "alpha"])?;
    for r in results {
        w.write_record([
            panel.users[r.user as usize].id.as_str(),
            r.algorithm.as_str(),
            &r.delta_q.to_string(),
            &r.k.to_string(),
            &r.alpha.to_string(),
        ])?;
    }
    finish(w)
}

/// `k,side,rate_mean,rate_se,n_users,welch_t,p_raw,p_bonferroni`
pub fn write_fairness<W: Write>(rows: &[FairnessRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "side", "rate_mean", "rate_se", "n_users", "welch_t", "p_raw", "p_bonferroni"])?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.side.as_str().to_string(),
            opt(r.rate.map(|s| s.mean)),
            opt(r.rate.and_then(|s| s.se)),
            r.n_users.to_string(),
            opt(r.welch_t),
            opt(r.p_raw),
            opt(r.p_bonferroni),
        ])?;
    }
    finish(w)
}

/// `analysis,x,y,control,r,p,n`
pub fn write_correlations<W: Write>(rows: &[CorrelationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["analysis", "x", "y", "control", "r", "p", "n"])?;
    for r in rows {
        w.write_record([
            r.analysis.as_str(),
            &r.x,
            &r.y,
            r.control.as_deref().unwrap_or(""),
            &r.r.to_string(),
            &r.p.to_string(),
            &r.n.to_string(),
        ])?;
    }
    finish(w)
}

/// `model,term,beta,se,p,r2,n`
pub fn write_regressions<W: Write>(rows: &[RegressionRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "term", "beta", "se", "p", "r2", "n"])?;
    for r in rows {
        w.write_record([
            r.model.as_str(),
            &r.term,
            &r.beta.to_string(),
            &r.se.to_string(),
            &r.p.to_string(),
            &r.r2.to_string(),
            &r.n.to_string(),
        ])?;
    }
    finish(w)
}

/// `key,stratum,algorithm,mean_delta_q,sem,n_users`
pub fn write_stratified<W: Write>(rows: &[StratumDeltaQ], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["key", "stratum", "algorithm", "mean_delta_q", "sem", "n_users"])?;
    for r in rows {
        w.write_record([
            r.key.as_str(),
            &r.stratum,
            r.algorithm.as_str(),
            &r.mean_delta_q.to_string(),
            &opt(r.sem),
            &r.n_users.to_string(),
        ])?;
    }
    finish(w)
}
