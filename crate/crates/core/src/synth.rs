//! Synthetic panels with a planted diversity–reliability effect.
//!
//! Users carry a partisanship on the 1..7 scale and a heavy-tailed browsing
//! budget. Each domain has an audience location `μ_d` and width; users pick
//! domains with probability proportional to popularity times a Gaussian
//! affinity in `p_u − μ_d`, so wide domains draw mixed audiences. Reliability
//! is then set from the realized audience variance:
//!
//! `Q(d) = clamp(β₀ + β₁·σ²(d) + β₂·1[republican]·σ²(d) + ε, 0, 100)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::DateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    assemble_panel, Category, PanelDataset, ScoreRecord, SurveyRecord, TrafficRecord, DEFAULT_MIN_VISITORS,
    TRUST_THRESHOLD,
};

/// First second of the first wave.
const WAVE_START: i64 = 1_475_280_000;
const WAVE_SPACING: i64 = 180 * 86_400;
const WAVE_LENGTH: i64 = 30 * 86_400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_domains: usize,
    pub seed: u64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub noise_sd: f64,
    pub satire_fraction: f64,
    pub platform_fraction: f64,
    /// Smallest and largest number of distinct domains per user.
    pub min_domains_per_user: usize,
    pub max_domains_per_user: usize,
    /// Pageview budget range per user; budgets follow a discrete power law
    /// and are raised to the number of visited domains when smaller.
    pub min_budget: u64,
    pub max_budget: u64,
    pub power_law_exponent: f64,
    /// Log-scale spread of per-domain engagement, the share of a visitor's
    /// pageviews a domain tends to hold.
    pub engagement_sd: f64,
    /// Range of audience widths on the partisanship scale.
    pub min_width: f64,
    pub max_width: f64,
    pub waves: usize,
    /// Slants mirror audience location around the midpoint.
    pub symmetric_slants: bool,
    /// Pair every domain and every user with a twin reflected about the
    /// midpoint (location `8 − μ`, partisanship `8 − p`) sharing all other
    /// draws, so the panel is exactly left/right symmetric. Needs even
    /// user and domain counts.
    pub mirror: bool,
    pub min_visitors: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 1000,
            n_domains: 200,
            seed: 0,
            beta0: 35.0,
            beta1: 6.0,
            beta2: 3.0,
            noise_sd: 6.0,
            satire_fraction: 0.02,
            platform_fraction: 0.02,
            min_domains_per_user: 10,
            max_domains_per_user: 60,
            min_budget: 20,
            max_budget: 20_000,
            power_law_exponent: 2.0,
            engagement_sd: 2.0,
            min_width: 2.0,
            max_width: 5.0,
            waves: 2,
            symmetric_slants: true,
            mirror: false,
            min_visitors: DEFAULT_MIN_VISITORS,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.n_users < 50 || self.n_domains < 20 {
            return bad(format!(
                "synthetic panel needs at least 50 users and 20 domains, got {} and {}",
                self.n_users, self.n_domains
            ));
        }
        if self.min_domains_per_user == 0
            || self.min_domains_per_user > self.max_domains_per_user
            || self.max_domains_per_user > self.n_domains
        {
            return bad(format!(
                "domains per user range {}..={} infeasible for {} domains",
                self.min_domains_per_user, self.max_domains_per_user, self.n_domains
            ));
        }
        if self.min_budget == 0 || self.min_budget > self.max_budget {
            return bad("pageview budget range must be positive and ordered".into());
        }
        if self.min_visitors > self.n_users {
            return bad(format!(
                "visitor threshold {} unreachable with {} users",
                self.min_visitors, self.n_users
            ));
        }
        if !(self.power_law_exponent > 1.0) {
            return bad("power-law exponent must exceed 1".into());
        }
        if !(self.min_width > 0.0 && self.min_width <= self.max_width) {
            return bad("audience widths must be positive and ordered".into());
        }
        if !(self.engagement_sd >= 0.0) {
            return bad("engagement spread must be nonnegative".into());
        }
        if !(self.noise_sd >= 0.0) {
            return bad("noise standard deviation must be nonnegative".into());
        }
        let special = self.satire_fraction + self.platform_fraction;
        if !(self.satire_fraction >= 0.0 && self.platform_fraction >= 0.0 && special < 1.0) {
            return bad("satire and platform fractions must be nonnegative and sum below 1".into());
        }
        if self.waves == 0 {
            return bad("at least one wave is required".into());
        }
        if self.mirror && (!self.n_users.is_multiple_of(2) || !self.n_domains.is_multiple_of(2)) {
            return bad("mirrored panels need even user and domain counts".into());
        }
        Ok(())
    }

    /// Timestamp separating the last wave from the earlier ones.
    pub fn longitudinal_boundary(&self) -> i64 {
        WAVE_START + (self.waves.max(2) as i64 - 1) * WAVE_SPACING
    }
}

/// Planted domain parameters, for checking recovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedDomain {
    pub domain: String,
    pub location: f64,
    pub width: f64,
    pub audience_variance: f64,
    pub audience_mean: f64,
    pub n_visitors: usize,
    pub score: f64,
    pub category: Category,
    pub slant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: SynthConfig,
    pub boundary: i64,
    pub n_domains_meeting_threshold: usize,
    pub files: Vec<String>,
    pub domains: Vec<PlantedDomain>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    /// One record list per wave.
    pub waves: Vec<Vec<TrafficRecord>>,
    pub survey: Vec<SurveyRecord>,
    pub scores: BTreeMap<String, ScoreRecord>,
    pub slants: BTreeMap<String, f64>,
    pub manifest: Manifest,
}

/// Inverse-CDF draw from a continuous power law on `[min, max]`, floored.
fn power_law(rng: &mut ChaCha8Rng, min: u64, max: u64, exponent: f64) -> u64 {
    let u: f64 = rng.gen();
    let x = min as f64 * (1.0 - u).powf(-1.0 / (exponent - 1.0));
    (x.floor() as u64).clamp(min, max)
}

const PARTY_WEIGHTS: [f64; 7] = [0.15, 0.13, 0.12, 0.20, 0.12, 0.13, 0.15];

fn draw_partisanship(rng: &mut ChaCha8Rng) -> u8 {
    let mut u: f64 = rng.gen();
    for (j, w) in PARTY_WEIGHTS.iter().enumerate() {
        if u < *w {
            return j as u8 + 1;
        }
        u -= w;
    }
    7
}

pub fn user_id(u: usize) -> String {
    format!("u{u:05}")
}

pub fn domain_name(d: usize) -> String {
    format!("site{d:04}.com")
}

fn iso(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .expect("timestamp in range")
        .format("%Y-%m-%dT%H:%M:%SZ")
        .to_string()
}

/// Generates a panel. Identical configs give identical data.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");

    // with mirroring, domain d < h has its twin at d + h and user 2i at 2i + 1
    let h = cfg.n_domains / 2;
    let twin = |d: usize| if d < h { d + h } else { d - h };
    let n_drawn = if cfg.mirror { h } else { cfg.n_domains };

    let party: Vec<u8> = if cfg.mirror {
        (0..cfg.n_users / 2)
            .flat_map(|_| {
                let p = draw_partisanship(&mut rng);
                [p, 8 - p]
            })
            .collect()
    } else {
        (0..cfg.n_users).map(|_| draw_partisanship(&mut rng)).collect()
    };
    let mut location: Vec<f64> = (0..n_drawn).map(|_| rng.gen_range(1.0..7.0)).collect();
    let mut width: Vec<f64> = (0..n_drawn)
        .map(|_| rng.gen_range(cfg.min_width..=cfg.max_width))
        .collect();
    // Zipf-like popularity in a random order
    let mut popularity: Vec<f64> = (0..n_drawn).map(|r| (r as f64 + 1.0).powf(-0.5)).collect();
    for i in (1..popularity.len()).rev() {
        let j = rng.gen_range(0..=i);
        popularity.swap(i, j);
    }
    let mut engagement: Vec<f64> = (0..n_drawn)
        .map(|_| (cfg.engagement_sd * std_normal.sample(&mut rng)).exp())
        .collect();
    if cfg.mirror {
        location.extend(location.clone().into_iter().map(|l| 8.0 - l));
        width.extend_from_within(..);
        popularity.extend_from_within(..);
        engagement.extend_from_within(..);
    }

    let mut visits: Vec<Vec<(usize, u64)>> = Vec::with_capacity(cfg.n_users);
    let mut keys: Vec<(f64, usize)> = Vec::with_capacity(cfg.n_domains);
    for (u, &p) in party.iter().enumerate() {
        if cfg.mirror && u % 2 == 1 {
            let mut row: Vec<(usize, u64)> = visits[u - 1].iter().map(|&(d, pv)| (twin(d), pv)).collect();
            row.sort_unstable();
            visits.push(row);
            continue;
        }
        let m = power_law(
            &mut rng,
            cfg.min_domains_per_user as u64,
            cfg.max_domains_per_user as u64,
            cfg.power_law_exponent,
        ) as usize;
        // at least one pageview per visited domain
        let budget = power_law(&mut rng, cfg.min_budget, cfg.max_budget, cfg.power_law_exponent).max(m as u64);
        keys.clear();
        for d in 0..cfg.n_domains {
            let z = (p as f64 - location[d]) / width[d];
            let w = popularity[d] * (-0.5 * z * z).exp();
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            // weighted sampling without replacement by exponential keys
            keys.push((u.ln() / w.max(1e-300), d));
        }
        keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let chosen: Vec<usize> = keys[..m].iter().map(|k| k.1).collect();
        let shares: Vec<f64> = chosen
            .iter()
            .map(|&d| {
                let e: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                engagement[d] * -e.ln()
            })
            .collect();
        let total: f64 = shares.iter().sum();
        let spare = budget - m as u64;
        let mut row: Vec<(usize, u64)> = chosen
            .iter()
            .zip(&shares)
            .map(|(&d, s)| (d, 1 + (spare as f64 * s / total).floor() as u64))
            .collect();
        row.sort_unstable();
        visits.push(row);
    }

    let mut counts = vec![[0u64; 7]; cfg.n_domains];
    for (u, row) in visits.iter().enumerate() {
        for &(d, _) in row {
            counts[d][party[u] as usize - 1] += 1;
        }
    }

    let mut scores = BTreeMap::new();
    let mut slants = BTreeMap::new();
    let mut planted = Vec::with_capacity(cfg.n_domains);
    let mut meeting = 0;
    let mut draws: Vec<(f64, f64, f64)> = Vec::with_capacity(n_drawn);
    for d in 0..cfg.n_domains {
        let n: u64 = counts[d].iter().sum();
        let (mean, var) = if n == 0 {
            (location[d], 0.0)
        } else {
            let mean = counts[d]
                .iter()
                .enumerate()
                .map(|(j, &c)| (j + 1) as f64 * c as f64)
                .sum::<f64>()
                / n as f64;
            let var = counts[d]
                .iter()
                .enumerate()
                .map(|(j, &c)| c as f64 * ((j + 1) as f64 - mean).powi(2))
                .sum::<f64>()
                / n as f64;
            (mean, var)
        };
        if n as usize >= cfg.min_visitors {
            meeting += 1;
        }
        let rep = if mean > 4.0 { 1.0 } else { 0.0 };
        let (eps, u, jitter) = if cfg.mirror && d >= h {
            let (e, u, j) = draws[twin(d)];
            (e, u, -j)
        } else {
            let eps = cfg.noise_sd * std_normal.sample(&mut rng);
            let u: f64 = rng.gen();
            let jitter = 0.2 * std_normal.sample(&mut rng);
            draws.push((eps, u, jitter));
            (eps, u, jitter)
        };
        let q = (cfg.beta0 + cfg.beta1 * var + cfg.beta2 * rep * var + eps).clamp(0.0, 100.0);
        let category = if u < cfg.satire_fraction {
            Category::Satire
        } else if u < cfg.satire_fraction + cfg.platform_fraction {
            Category::Platform
        } else if q >= TRUST_THRESHOLD {
            Category::Green
        } else {
            Category::Red
        };
        let slant = if cfg.symmetric_slants {
            ((location[d] - 4.0) / 1.5 + jitter).clamp(-2.0, 2.0)
        } else {
            ((location[d] - 3.0) / 1.5 + jitter).clamp(-2.0, 2.0)
        };
        let name = domain_name(d);
        scores.insert(name.clone(), ScoreRecord::new(q, category)?);
        slants.insert(name.clone(), slant);
        planted.push(PlantedDomain {
            domain: name,
            location: location[d],
            width: width[d],
            audience_variance: var,
            audience_mean: mean,
            n_visitors: n as usize,
            score: q,
            category,
            slant,
        });
    }

    let mut waves = vec![Vec::new(); cfg.waves];
    for (u, row) in visits.iter().enumerate() {
        let id = user_id(u);
        for &(d, pv) in row {
            let mut left = pv;
            for (w, wave) in waves.iter_mut().enumerate() {
                let part = if w + 1 == cfg.waves {
                    left
                } else {
                    let p = 1.0 / (cfg.waves - w) as f64;
                    Binomial::new(left, p).expect("valid binomial").sample(&mut rng)
                };
                left -= part;
                if part == 0 {
                    continue;
                }
                let ts = WAVE_START + w as i64 * WAVE_SPACING + rng.gen_range(0..WAVE_LENGTH);
                wave.push(TrafficRecord {
                    user_id: id.clone(),
                    domain: domain_name(d),
                    timestamp: Some(ts),
                    pageviews: part,
                });
            }
        }
    }

    let survey = party
        .iter()
        .enumerate()
        .map(|(u, &p)| SurveyRecord {
            user_id: user_id(u),
            partisanship: p,
        })
        .collect();
    let mut files: Vec<String> = (1..=cfg.waves).map(|w| format!("traffic_wave{w}.csv")).collect();
    files.extend(["survey.csv", "scores.csv", "slants.csv"].map(String::from));
    Ok(SynthData {
        waves,
        survey,
        scores,
        slants,
        manifest: Manifest {
            config: cfg.clone(),
            boundary: cfg.longitudinal_boundary(),
            n_domains_meeting_threshold: meeting,
            files,
            domains: planted,
        },
    })
}

impl SynthData {
    /// Ingests the generated data in memory.
    pub fn panel(&self, min_visitors: usize) -> Result<PanelDataset> {
        let traffic: Vec<TrafficRecord> = self.waves.iter().flatten().cloned().collect();
        assemble_panel(traffic, &self.survey, &self.scores, &self.slants, min_visitors)
    }

    /// Users that appear in any wave.
    pub fn active_users(&self) -> BTreeSet<&str> {
        self.waves.iter().flatten().map(|r| r.user_id.as_str()).collect()
    }

    /// Writes the ingest CSV formats and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let open = |name: &str| -> Result<(PathBuf, csv::Writer<BufWriter<File>>)> {
            let path = dir.join(name);
            let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
            Ok((path, csv::Writer::from_writer(BufWriter::new(f))))
        };
        for (w, wave) in self.waves.iter().enumerate() {
            let (path, mut out) = open(&format!("traffic_wave{}.csv", w + 1))?;
            out.write_record(["user_id", "domain", "timestamp", "pageviews"])?;
            for r in wave {
                let ts = r.timestamp.map(iso).unwrap_or_default();
                out.write_record([r.user_id.as_str(), r.domain.as_str(), &ts, &r.pageviews.to_string()])?;
            }
            out.flush().map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        let (path, mut out) = open("survey.csv")?;
        out.write_record(["user_id", "partisanship"])?;
        for s in &self.survey {
            out.write_record([s.user_id.as_str(), &s.partisanship.to_string()])?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
        let (path, mut out) = open("scores.csv")?;
        out.write_record(["domain", "score", "category"])?;
        for (d, s) in &self.scores {
            out.write_record([d.as_str(), &s.score.to_string(), s.category.as_str()])?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
        let (path, mut out) = open("slants.csv")?;
        out.write_record(["domain", "slant"])?;
        for (d, s) in &self.slants {
            out.write_record([d.as_str(), &s.to_string()])?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
        let path = dir.join("manifest.json");
        let mut f = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        serde_json::to_writer_pretty(&mut f, &self.manifest)?;
        f.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        f.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_users: 120,
            n_domains: 30,
            seed: 5,
            max_domains_per_user: 20,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
        let other = SynthConfig { seed: 6, ..small() };
        assert_ne!(generate(&small()).unwrap().survey, generate(&other).unwrap().survey);
    }

    #[test]
    fn mirrored_panel_is_symmetric() {
        let cfg = SynthConfig {
            mirror: true,
            beta2: 0.0,
            ..small()
        };
        let data = generate(&cfg).unwrap();
        let h = cfg.n_domains / 2;
        let doms = &data.manifest.domains;
        for d in 0..h {
            let (a, b) = (&doms[d], &doms[d + h]);
            assert!((a.location + b.location - 8.0).abs() < 1e-12);
            assert_eq!(a.n_visitors, b.n_visitors);
            assert!((a.audience_variance - b.audience_variance).abs() < 1e-12);
            assert!((a.audience_mean + b.audience_mean - 8.0).abs() < 1e-12);
            assert!((a.score - b.score).abs() < 1e-9);
            assert!((a.slant + b.slant).abs() < 1e-12);
        }
        for pair in data.survey.chunks(2) {
            assert_eq!(pair[0].partisanship + pair[1].partisanship, 8);
        }
        assert!(generate(&SynthConfig { n_users: 121, ..cfg }).is_err());
    }

    #[test]
    fn records_are_valid() {
        let data = generate(&small()).unwrap();
        assert!(data.survey.iter().all(|s| (1..=7).contains(&s.partisanship)));
        assert!(data.scores.values().all(|s| (0.0..=100.0).contains(&s.score)));
        assert!(data.slants.values().all(|s| (-2.0..=2.0).contains(s)));
        for r in data.waves.iter().flatten() {
            assert!(r.pageviews >= 1);
            assert!(r.timestamp.unwrap() >= WAVE_START);
        }
        let boundary = data.manifest.boundary;
        assert!(data.waves[0].iter().all(|r| r.timestamp.unwrap() < boundary));
        assert!(data.waves[1].iter().all(|r| r.timestamp.unwrap() >= boundary));
    }

    #[test]
    fn infeasible_configs() {
        assert!(generate(&SynthConfig { n_users: 10, ..small() }).is_err());
        assert!(generate(&SynthConfig { min_visitors: 500, ..small() }).is_err());
        assert!(generate(&SynthConfig { max_domains_per_user: 31, ..small() }).is_err());
    }
}
