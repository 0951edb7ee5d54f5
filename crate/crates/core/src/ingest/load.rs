use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use csv::{ReaderBuilder, StringRecord, Trim};
use log::warn;

use super::{Category, PageviewCell, PanelDataset, ScoreRecord, SurveyRecord, TrafficRecord, User, Visit};
use crate::error::{Error, Result};

/// Lowercases a hostname and strips scheme, path, port and a leading `www.`.
pub fn normalize_domain(raw: &str) -> Result<String> {
    let mut s = raw.trim().to_ascii_lowercase();
    if let Some(pos) = s.find("://") {
        s.drain(..pos + 3);
    }
    if let Some(pos) = s.find(['/', '?', '#']) {
        s.truncate(pos);
    }
    if let Some(pos) = s.rfind(':') {
        if s[pos + 1..].chars().all(|c| c.is_ascii_digit()) {
            s.truncate(pos);
        }
    }
    let s = s.strip_prefix("www.").unwrap_or(&s).trim_end_matches('.');
    if s.is_empty() {
        return Err(Error::invalid(format!("empty domain in {raw:?}")));
    }
    if s.chars().any(char::is_whitespace) {
        return Err(Error::invalid(format!("domain {raw:?} contains whitespace")));
    }
    Ok(s.to_string())
}

/// Parses an ISO-8601 UTC timestamp (or plain epoch seconds) into UTC seconds.
/// Empty input means "no timestamp".
pub fn parse_timestamp(raw: &str) -> Result<Option<i64>> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(None);
    }
    if let Ok(secs) = s.parse::<i64>() {
        return Ok(Some(secs));
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(Some(dt.timestamp()));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(Some(dt.and_utc().timestamp()));
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(Some(d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp()));
    }
    Err(Error::invalid(format!("unparseable timestamp {s:?}")))
}

/// A CSV file with named columns and line-numbered rows.
struct Table {
    path: std::path::PathBuf,
    columns: Vec<usize>,
    reader: csv::Reader<std::fs::File>,
}

impl Table {
    fn open(path: &Path, required: &[&str], optional: &[&str]) -> Result<Self> {
        let mut reader = ReaderBuilder::new()
            .trim(Trim::All)
            .flexible(true)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
        };
        let mut columns = Vec::with_capacity(required.len() + optional.len());
        for name in required {
            let pos = find(name)
                .ok_or_else(|| Error::parse(path, 1, format!("missing column {name:?}")))?;
            columns.push(pos);
        }
        for name in optional {
            columns.push(find(name).unwrap_or(usize::MAX));
        }
        Ok(Table {
            path: path.to_path_buf(),
            columns,
            reader,
        })
    }

    /// Calls `f(line, fields)` for every row; `fields[i]` follows the column
    /// order given to `open`, with missing optional columns as "".
    fn for_each(mut self, mut f: impl FnMut(u64, &[&str]) -> Result<()>) -> Result<()> {
        let mut record = StringRecord::new();
        loop {
            let more = self
                .reader
                .read_record(&mut record)
                .map_err(|e| csv_error(&self.path, e))?;
            if !more {
                return Ok(());
            }
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.iter().all(str::is_empty) {
                continue;
            }
            let fields: Vec<&str> = self
                .columns
                .iter()
                .map(|&c| record.get(c).unwrap_or(""))
                .collect();
            f(line, &fields).map_err(|e| match e {
                Error::InvalidInput(msg) => Error::parse(&self.path, line, msg),
                other => other,
            })?;
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::invalid(format!("{what} {field:?} is not a number")))?;
    if !v.is_finite() {
        return Err(Error::invalid(format!("{what} {field:?} is not finite")));
    }
    Ok(v)
}

pub fn read_traffic(path: &Path) -> Result<Vec<TrafficRecord>> {
    let table = Table::open(path, &["user_id", "domain", "pageviews"], &["timestamp"])?;
    let mut out = Vec::new();
    table.for_each(|_, f| {
        let user_id = f[0];
        if user_id.is_empty() {
            return Err(Error::invalid("empty user_id"));
        }
        let domain = normalize_domain(f[1])?;
        let pageviews: u64 = f[2]
            .parse()
            .map_err(|_| Error::invalid(format!("pageviews {:?} is not a positive integer", f[2])))?;
        if pageviews == 0 {
            return Err(Error::invalid("pageviews must be at least 1"));
        }
        let timestamp = parse_timestamp(f[3])?;
        out.push(TrafficRecord {
            user_id: user_id.to_string(),
            domain,
            timestamp,
            pageviews,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn read_survey(path: &Path) -> Result<Vec<SurveyRecord>> {
    let table = Table::open(path, &["user_id", "partisanship"], &[])?;
    let mut out = Vec::new();
    table.for_each(|_, f| {
        if f[0].is_empty() {
            return Err(Error::invalid("empty user_id"));
        }
        let partisanship: u8 = f[1]
            .parse()
            .ok()
            .filter(|p| (1..=7).contains(p))
            .ok_or_else(|| Error::invalid(format!("partisanship {:?} not in 1..7", f[1])))?;
        out.push(SurveyRecord {
            user_id: f[0].to_string(),
            partisanship,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn read_scores(path: &Path) -> Result<BTreeMap<String, ScoreRecord>> {
    let table = Table::open(path, &["domain", "score", "category"], &[])?;
    let mut out = BTreeMap::new();
    table.for_each(|_, f| {
        let domain = normalize_domain(f[0])?;
        let score = parse_f64(f[1], "score")?;
        let category: Category = f[2].parse()?;
        let record = ScoreRecord::new(score, category)?;
        if let Some(prev) = out.insert(domain.clone(), record) {
            if prev != record {
                return Err(Error::invalid(format!("conflicting scores for {domain}")));
            }
        }
        Ok(())
    })?;
    Ok(out)
}

pub fn read_slants(path: &Path) -> Result<BTreeMap<String, f64>> {
    let table = Table::open(path, &["domain", "slant"], &[])?;
    let mut out = BTreeMap::new();
    table.for_each(|_, f| {
        let domain = normalize_domain(f[0])?;
        let slant = parse_f64(f[1], "slant")?;
        if !(-2.0..=2.0).contains(&slant) {
            return Err(Error::invalid(format!("slant {slant} outside [-2, 2]")));
        }
        if let Some(prev) = out.insert(domain.clone(), slant) {
            if prev != slant {
                return Err(Error::invalid(format!("conflicting slants for {domain}")));
            }
        }
        Ok(())
    })?;
    Ok(out)
}

/// Reads every input file and builds the filtered panel.
///
/// Traffic files are pooled (pageviews summed per user and domain), users
/// without a survey answer are dropped, domains with fewer than
/// `min_visitors` distinct visitors are removed, then users left without
/// traffic are removed.
pub fn load_panel<P: AsRef<Path>>(
    traffic_paths: &[P],
    survey_path: &Path,
    scores_path: &Path,
    slants_path: Option<&Path>,
    min_visitors: usize,
) -> Result<PanelDataset> {
    if traffic_paths.is_empty() {
        return Err(Error::invalid("at least one traffic file is required"));
    }
    let survey = read_survey(survey_path)?;
    let scores = read_scores(scores_path)?;
    let slants = match slants_path {
        Some(p) => read_slants(p)?,
        None => BTreeMap::new(),
    };
    let mut traffic = Vec::new();
    for p in traffic_paths {
        traffic.extend(read_traffic(p.as_ref())?);
    }
    assemble_panel(traffic, &survey, &scores, &slants, min_visitors)
}

/// In-memory counterpart of [`load_panel`].
pub fn assemble_panel(
    traffic: Vec<TrafficRecord>,
    survey: &[SurveyRecord],
    scores: &BTreeMap<String, ScoreRecord>,
    slants: &BTreeMap<String, f64>,
    min_visitors: usize,
) -> Result<PanelDataset> {
    if min_visitors == 0 {
        return Err(Error::invalid("min_visitors must be positive"));
    }

    let mut partisanship: BTreeMap<&str, u8> = BTreeMap::new();
    for r in survey {
        if let Some(&prev) = partisanship.get(r.user_id.as_str()) {
            if prev != r.partisanship {
                return Err(Error::ConflictingSurvey {
                    user: r.user_id.clone(),
                    first: prev,
                    second: r.partisanship,
                });
            }
        }
        partisanship.insert(&r.user_id, r.partisanship);
    }

    let mut unsurveyed: BTreeSet<&str> = BTreeSet::new();
    let mut pooled: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for r in &traffic {
        if r.pageviews == 0 {
            return Err(Error::invalid(format!(
                "zero pageviews for {} on {}",
                r.user_id, r.domain
            )));
        }
        if !partisanship.contains_key(r.user_id.as_str()) {
            unsurveyed.insert(&r.user_id);
            continue;
        }
        *pooled.entry((&r.user_id, &r.domain)).or_default() += r.pageviews;
    }
    if !unsurveyed.is_empty() {
        warn!(
            "dropped {} users with traffic but no survey record",
            unsurveyed.len()
        );
    }

    let mut visitors: BTreeMap<&str, usize> = BTreeMap::new();
    for &(_, domain) in pooled.keys() {
        *visitors.entry(domain).or_default() += 1;
    }
    let domains: Vec<String> = visitors
        .iter()
        .filter(|&(_, &n)| n >= min_visitors)
        .map(|(&d, _)| d.to_string())
        .collect();
    let users: Vec<User> = pooled
        .keys()
        .filter(|(_, d)| domains.binary_search_by(|x| x.as_str().cmp(d)).is_ok())
        .map(|&(u, _)| u)
        .collect::<BTreeSet<&str>>()
        .into_iter()
        .map(|u| User {
            id: u.to_string(),
            partisanship: partisanship[u],
        })
        .collect();

    let user_ix = |id: &str| users.binary_search_by(|u| u.id.as_str().cmp(id)).ok();
    let domain_ix = |d: &str| domains.binary_search_by(|x| x.as_str().cmp(d)).ok();

    let mut cells = Vec::new();
    for (&(u, d), &pageviews) in &pooled {
        if let (Some(ui), Some(di)) = (user_ix(u), domain_ix(d)) {
            cells.push(PageviewCell {
                user: ui as u32,
                domain: di as u32,
                pageviews,
            });
        }
    }
    cells.sort_by_key(|c| (c.user, c.domain));

    let mut visits = Vec::new();
    for r in &traffic {
        if let (Some(ui), Some(di)) = (user_ix(&r.user_id), domain_ix(&r.domain)) {
            visits.push(Visit {
                user: ui as u32,
                domain: di as u32,
                timestamp: r.timestamp,
                pageviews: r.pageviews,
            });
        }
    }
    visits.sort_by_key(|v| (v.user, v.domain, v.timestamp, v.pageviews));

    let panel_scores = domains.iter().map(|d| scores.get(d).copied()).collect();
    let panel_slants = domains.iter().map(|d| slants.get(d).copied()).collect();

    Ok(PanelDataset {
        min_visitors,
        users,
        domains,
        cells,
        visits,
        scores: panel_scores,
        slants: panel_slants,
        dropped_users_without_survey: unsurveyed.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(user: &str, domain: &str, pv: u64) -> TrafficRecord {
        TrafficRecord {
            user_id: user.into(),
            domain: domain.into(),
            timestamp: None,
            pageviews: pv,
        }
    }

    fn survey(ids: &[(&str, u8)]) -> Vec<SurveyRecord> {
        ids.iter()
            .map(|&(u, p)| SurveyRecord {
                user_id: u.into(),
                partisanship: p,
            })
            .collect()
    }

    #[test]
    fn normalizes_hostnames() {
        assert_eq!(normalize_domain("WWW.NYTimes.com").unwrap(), "nytimes.com");
        assert_eq!(
            normalize_domain("https://www.wsj.com/articles/x?y=1").unwrap(),
            "wsj.com"
        );
        assert_eq!(normalize_domain("foo.org:8080").unwrap(), "foo.org");
        assert!(normalize_domain("  ").is_err());
        assert!(normalize_domain("bad domain.com").is_err());
    }

    #[test]
    fn parses_timestamps() {
        assert_eq!(parse_timestamp("").unwrap(), None);
        assert_eq!(parse_timestamp("1970-01-01T00:01:00Z").unwrap(), Some(60));
        assert_eq!(parse_timestamp("1970-01-02").unwrap(), Some(86_400));
        assert_eq!(parse_timestamp("120").unwrap(), Some(120));
        assert!(parse_timestamp("yesterday").is_err());
    }

    #[test]
    fn pools_waves_by_summing() {
        let traffic = vec![rec("a", "d1", 2), rec("a", "d1", 3)];
        let panel = assemble_panel(
            traffic,
            &survey(&[("a", 3)]),
            &BTreeMap::new(),
            &BTreeMap::new(),
            1,
        )
        .unwrap();
        assert_eq!(panel.cells.len(), 1);
        assert_eq!(panel.cells[0].pageviews, 5);
        assert_eq!(panel.visits.len(), 2);
    }

    #[test]
    fn drops_domains_below_threshold_and_orphaned_users() {
        let traffic = vec![rec("a", "d1", 1), rec("b", "d1", 1), rec("c", "d2", 4)];
        let panel = assemble_panel(
            traffic,
            &survey(&[("a", 1), ("b", 7), ("c", 4)]),
            &BTreeMap::new(),
            &BTreeMap::new(),
            2,
        )
        .unwrap();
        assert_eq!(panel.domains, vec!["d1".to_string()]);
        assert_eq!(panel.n_users(), 2);
        assert!(panel.user_index("c").is_none());
    }

    #[test]
    fn drops_unsurveyed_users() {
        let traffic = vec![rec("a", "d1", 1), rec("ghost", "d1", 1)];
        let panel = assemble_panel(
            traffic,
            &survey(&[("a", 2)]),
            &BTreeMap::new(),
            &BTreeMap::new(),
            1,
        )
        .unwrap();
        assert_eq!(panel.n_users(), 1);
        assert_eq!(panel.dropped_users_without_survey, 1);
    }

    #[test]
    fn conflicting_survey_is_an_error() {
        let err = assemble_panel(
            vec![rec("a", "d1", 1)],
            &survey(&[("a", 2), ("a", 5)]),
            &BTreeMap::new(),
            &BTreeMap::new(),
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ConflictingSurvey { .. }));
        // repeated identical answers are fine
        assemble_panel(
            vec![rec("a", "d1", 1)],
            &survey(&[("a", 2), ("a", 2)]),
            &BTreeMap::new(),
            &BTreeMap::new(),
            1,
        )
        .unwrap();
    }

    #[test]
    fn score_validation() {
        assert!(ScoreRecord::new(101.0, Category::Green).is_err());
        assert!(ScoreRecord::new(-1.0, Category::Satire).is_err());
        assert!(ScoreRecord::new(59.5, Category::Green).is_err());
        assert!(ScoreRecord::new(60.0, Category::Red).is_err());
        assert!(ScoreRecord::new(60.0, Category::Green).unwrap().is_trustworthy());
        assert!(!ScoreRecord::new(80.0, Category::Platform).unwrap().is_news());
    }
}
