use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PanelDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// A nonzero entry of the ratings matrix together with the pageviews it was
/// computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingCell {
    pub domain: u32,
    pub rating: f64,
    pub pageviews: u64,
}

/// Sparse user × domain TF-IDF ratings with a train/test partition.
///
/// Rows are indexed by panel user index and each row is sorted by domain.
/// An unsplit matrix keeps every cell in the training partition. After a
/// random split the partitions are disjoint per user; after a longitudinal
/// split a (user, domain) pair may occur in both, each with the pageviews
/// that fell on its side of the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingsMatrix {
    n_domains: usize,
    train: Vec<Vec<RatingCell>>,
    test: Vec<Vec<RatingCell>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SplitMode {
    /// Each visited domain of each user goes to training with probability
    /// `train_fraction`, independently per user.
    Random { train_fraction: f64, seed: u64 },
    /// Pageviews strictly before `boundary` (UTC seconds) train, the rest test.
    Longitudinal { boundary: i64 },
}

impl RatingsMatrix {
    pub fn new(n_domains: usize, train: Vec<Vec<RatingCell>>, test: Vec<Vec<RatingCell>>) -> Self {
        assert_eq!(train.len(), test.len());
        RatingsMatrix {
            n_domains,
            train,
            test,
        }
    }

    pub fn n_users(&self) -> usize {
        self.train.len()
    }

    pub fn n_domains(&self) -> usize {
        self.n_domains
    }

    pub fn train(&self, user: u32) -> &[RatingCell] {
        &self.train[user as usize]
    }

    pub fn test(&self, user: u32) -> &[RatingCell] {
        &self.test[user as usize]
    }

    pub fn train_rating(&self, user: u32, domain: u32) -> Option<f64> {
        lookup(&self.train[user as usize], domain)
    }

    pub fn test_rating(&self, user: u32, domain: u32) -> Option<f64> {
        lookup(&self.test[user as usize], domain)
    }

    /// Number of nonzero cells in each partition.
    pub fn counts(&self) -> (usize, usize) {
        (
            self.train.iter().map(Vec::len).sum(),
            self.test.iter().map(Vec::len).sum(),
        )
    }

    /// All cells as (user, domain, rating, split), training partition first
    /// within each user.
    pub fn triplets(&self) -> impl Iterator<Item = (u32, &RatingCell, Split)> + '_ {
        (0..self.n_users()).flat_map(move |u| {
            let train = self.train[u].iter().map(move |c| (u as u32, c, Split::Train));
            let test = self.test[u].iter().map(move |c| (u as u32, c, Split::Test));
            train.chain(test)
        })
    }

    /// Writes the `user_id,domain,rating,split` triplet CSV.
    pub fn write_triplets<W: Write>(&self, panel: &PanelDataset, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["user_id", "domain", "rating", "split"])?;
        for (u, cell, split) in self.triplets() {
            w.write_record([
                panel.users[u as usize].id.as_str(),
                panel.domains[cell.domain as usize].as_str(),
                &cell.rating.to_string(),
                split.as_str(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<triplets>", e))?;
        Ok(())
    }
}

fn lookup(row: &[RatingCell], domain: u32) -> Option<f64> {
    row.binary_search_by_key(&domain, |c| c.domain)
        .ok()
        .map(|i| row[i].rating)
}

/// Pageview count keyed by (user, domain).
type Counts = BTreeMap<(u32, u32), u64>;

/// Domain totals and grand total of a count table.
fn domain_totals(counts: &Counts, n_domains: usize) -> (Vec<u64>, u64) {
    let mut per_domain = vec![0u64; n_domains];
    for (&(_, d), &pv) in counts {
        per_domain[d as usize] += pv;
    }
    let total = per_domain.iter().sum();
    (per_domain, total)
}

/// TF-IDF rows for `counts`, with the IDF taken from the given domain totals.
/// Cells whose domain has no mass in `idf_totals` are skipped.
fn tfidf_rows(counts: &Counts, n_users: usize, idf_totals: &[u64], idf_grand: u64) -> Vec<Vec<RatingCell>> {
    let mut user_totals = vec![0u64; n_users];
    for (&(u, _), &pv) in counts {
        user_totals[u as usize] += pv;
    }
    let mut rows = vec![Vec::new(); n_users];
    for (&(u, d), &pv) in counts {
        let dom = idf_totals[d as usize];
        if dom == 0 {
            continue;
        }
        let tf = pv as f64 / user_totals[u as usize] as f64;
        let idf = (idf_grand as f64 / dom as f64).ln();
        rows[u as usize].push(RatingCell {
            domain: d,
            rating: tf * idf,
            pageviews: pv,
        });
    }
    rows
}

/// Ratings for the whole panel, every cell in the training partition:
/// `v[u,d] = (π[u,d] / Σ_h π[u,h]) · ln(π / Σ_u π[u,d])`.
pub fn build_ratings(panel: &PanelDataset) -> Result<RatingsMatrix> {
    if panel.cells.is_empty() {
        return Err(Error::invalid("panel has no traffic"));
    }
    let counts: Counts = panel
        .cells
        .iter()
        .map(|c| ((c.user, c.domain), c.pageviews))
        .collect();
    let (per_domain, total) = domain_totals(&counts, panel.n_domains());
    let train = tfidf_rows(&counts, panel.n_users(), &per_domain, total);
    let test = vec![Vec::new(); panel.n_users()];
    Ok(RatingsMatrix::new(panel.n_domains(), train, test))
}

/// Splits the panel into training and test ratings.
///
/// Random mode tags cells of the full-panel matrix. Longitudinal mode
/// recomputes ratings per partition; both partitions take their IDF from
/// training traffic only, and test cells on domains without any training
/// traffic are dropped (they can never receive a prediction).
pub fn split(panel: &PanelDataset, mode: SplitMode) -> Result<RatingsMatrix> {
    let matrix = match mode {
        SplitMode::Random {
            train_fraction,
            seed,
        } => {
            if !(train_fraction > 0.0 && train_fraction < 1.0) {
                return Err(Error::invalid(format!(
                    "train fraction {train_fraction} outside (0, 1)"
                )));
            }
            let full = build_ratings(panel)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut train = Vec::with_capacity(full.n_users());
            let mut test = Vec::with_capacity(full.n_users());
            for row in full.train {
                let (tr, te): (Vec<RatingCell>, Vec<RatingCell>) =
                    row.into_iter().partition(|_| rng.gen_bool(train_fraction));
                train.push(tr);
                test.push(te);
            }
            RatingsMatrix::new(panel.n_domains(), train, test)
        }
        SplitMode::Longitudinal { boundary } => {
            if !panel.has_timestamps() {
                return Err(Error::invalid(
                    "longitudinal split needs a timestamp on every traffic record",
                ));
            }
            let mut before = Counts::new();
            let mut after = Counts::new();
            for v in &panel.visits {
                let side = if v.timestamp.unwrap() < boundary {
                    &mut before
                } else {
                    &mut after
                };
                *side.entry((v.user, v.domain)).or_default() += v.pageviews;
            }
            let (per_domain, total) = domain_totals(&before, panel.n_domains());
            let train = tfidf_rows(&before, panel.n_users(), &per_domain, total);
            let test = tfidf_rows(&after, panel.n_users(), &per_domain, total);
            RatingsMatrix::new(panel.n_domains(), train, test)
        }
    };
    let usable = (0..matrix.n_users())
        .any(|u| !matrix.train[u].is_empty() && !matrix.test[u].is_empty());
    if !usable {
        return Err(Error::invalid(
            "split leaves no user with both training and test domains",
        ));
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{PageviewCell, User, Visit};

    fn panel_from(counts: &[&[u64]]) -> PanelDataset {
        let n_domains = counts[0].len();
        let mut cells = Vec::new();
        let mut visits = Vec::new();
        for (u, row) in counts.iter().enumerate() {
            for (d, &pv) in row.iter().enumerate() {
                if pv > 0 {
                    cells.push(PageviewCell {
                        user: u as u32,
                        domain: d as u32,
                        pageviews: pv,
                    });
                    visits.push(Visit {
                        user: u as u32,
                        domain: d as u32,
                        timestamp: Some(100 * d as i64),
                        pageviews: pv,
                    });
                }
            }
        }
        PanelDataset {
            min_visitors: 1,
            users: (0..counts.len())
                .map(|u| User {
                    id: format!("u{u:03}"),
                    partisanship: 4,
                })
                .collect(),
            domains: (0..n_domains).map(|d| format!("d{d:03}.com")).collect(),
            cells,
            visits,
            scores: vec![None; n_domains],
            slants: vec![None; n_domains],
            dropped_users_without_survey: 0,
        }
    }

    #[test]
    fn degenerate_idf_gives_zero() {
        let m = build_ratings(&panel_from(&[&[5]])).unwrap();
        assert_eq!(m.train_rating(0, 0), Some(0.0));
    }

    #[test]
    fn two_by_two_hand_values() {
        let m = build_ratings(&panel_from(&[&[2, 0], &[1, 1]])).unwrap();
        let ln43 = (4.0f64 / 3.0).ln();
        assert!((m.train_rating(0, 0).unwrap() - ln43).abs() < 1e-15);
        assert_eq!(m.train_rating(0, 1), None);
        assert!((m.train_rating(1, 0).unwrap() - 0.5 * ln43).abs() < 1e-15);
        assert!((m.train_rating(1, 1).unwrap() - 0.5 * 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn exclusive_domain_rating_is_log_of_share() {
        // user 0 puts all 6 pageviews on a domain nobody else visits; P = 10
        let m = build_ratings(&panel_from(&[&[6, 0], &[0, 4]])).unwrap();
        assert!((m.train_rating(0, 0).unwrap() - (10.0f64 / 6.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn random_split_is_deterministic_and_partitions() {
        let row: Vec<u64> = (1..=10).collect();
        let rows: Vec<&[u64]> = vec![&row, &row];
        let panel = panel_from(&rows);
        let mode = SplitMode::Random {
            train_fraction: 0.7,
            seed: 11,
        };
        let a = split(&panel, mode).unwrap();
        let b = split(&panel, mode).unwrap();
        assert_eq!(a, b);
        for u in 0..2 {
            let mut all: Vec<u32> = a.train(u).iter().chain(a.test(u)).map(|c| c.domain).collect();
            all.sort();
            assert_eq!(all, (0..10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn longitudinal_test_needs_trained_domains() {
        // timestamps are 100·domain: boundary 250 leaves domains 3 and 4 with
        // test traffic only, which is dropped, so nothing remains to test
        let panel = panel_from(&[&[1, 2, 3, 4, 5], &[5, 4, 3, 2, 1]]);
        assert!(split(&panel, SplitMode::Longitudinal { boundary: 250 }).is_err());
        // everything before the boundary
        assert!(split(&panel, SplitMode::Longitudinal { boundary: 10_000 }).is_err());
    }

    #[test]
    fn longitudinal_domain_in_both_partitions() {
        let mut panel = panel_from(&[&[3, 1], &[1, 1]]);
        // an extra visit of user 0 to domain 0 after the boundary
        panel.visits.push(Visit {
            user: 0,
            domain: 0,
            timestamp: Some(1_000),
            pageviews: 2,
        });
        let m = split(&panel, SplitMode::Longitudinal { boundary: 500 }).unwrap();
        assert!(m.train_rating(0, 0).is_some());
        assert!(m.test_rating(0, 0).is_some());
        assert_eq!(m.test(0)[0].pageviews, 2);
    }

    #[test]
    fn longitudinal_all_before_boundary_errors() {
        let panel = panel_from(&[&[1, 2], &[2, 1]]);
        let err = split(&panel, SplitMode::Longitudinal { boundary: 10_000 }).unwrap_err();
        assert!(err.is_input());
    }

    #[test]
    fn longitudinal_without_timestamps_errors() {
        let mut panel = panel_from(&[&[1, 2], &[2, 1]]);
        panel.visits[0].timestamp = None;
        assert!(split(&panel, SplitMode::Longitudinal { boundary: 50 }).is_err());
    }

    #[test]
    fn bad_fraction_rejected() {
        let panel = panel_from(&[&[1, 2], &[2, 1]]);
        for f in [0.0, 1.0, -0.2, f64::NAN] {
            let mode = SplitMode::Random {
                train_fraction: f,
                seed: 0,
            };
            assert!(split(&panel, mode).is_err());
        }
    }
}
