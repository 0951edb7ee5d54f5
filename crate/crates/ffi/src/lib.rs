//! C ABI over the `divrec` crate.
//!
//! Every entry point returns a [`DivrecStatus`]; values come back through
//! out-pointers. On failure a message is available from
//! [`divrec_last_error`] on the same thread. Handles are opaque and must be
//! released with their `_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use divrec::diversity::{metric_value, Level, Metric, BINS};
use divrec::evaluation::discount_distribution;
use divrec::ingest::{load_panel, PanelDataset, SplitMode};
use divrec::pipeline::{Experiment, ExperimentConfig};
use divrec::recommender::{Algorithm, LogisticParams};
use divrec::similarity::Kernel;
use divrec::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivrecStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Computation = 5,
    BufferTooSmall = 6,
    /// The quantity is not defined for these inputs (no neighbours, constant vector).
    Undefined = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivrecSplit {
    Random = 0,
    Longitudinal = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivrecKernel {
    Kendall = 0,
    Pearson = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivrecMetric {
    Variance = 0,
    EntropyMl = 1,
    EntropyDirichlet = 2,
    EntropyNsb = 3,
    CompMaxProb = 4,
    CompGini = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivrecLevel {
    User = 0,
    Pageview = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivrecAlgorithm {
    Cf = 0,
    Cfd = 1,
    Popularity = 2,
    Actual = 3,
}

/// Experiment settings. Start from [`divrec_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DivrecConfig {
    pub split: DivrecSplit,
    pub train_fraction: f64,
    pub seed: u64,
    /// UTC seconds; used by the longitudinal split only.
    pub boundary: i64,
    pub kernel: DivrecKernel,
    pub n_neighbors: usize,
    pub metric: DivrecMetric,
    pub level: DivrecLevel,
    pub restrict_to_train: bool,
    pub a: f64,
    pub psi: f64,
    /// Logistic location, read only when `has_t` is set.
    pub t: f64,
    pub has_t: bool,
}

/// A loaded, filtered panel.
pub struct DivrecPanel {
    inner: PanelDataset,
}

/// A fitted CF / CF+D model with per-user candidate sets.
pub struct DivrecRecommender {
    experiment: Experiment,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let msg = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: DivrecStatus, message: impl Into<String>) -> DivrecStatus {
    set_last_error(message);
    status
}

fn from_error(err: Error) -> DivrecStatus {
    let status = match &err {
        Error::Io { .. } => DivrecStatus::Io,
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) | Error::ConflictingSurvey { .. } => DivrecStatus::Parse,
        Error::InvalidInput(_) => DivrecStatus::InvalidArgument,
        _ => DivrecStatus::Computation,
    };
    fail(status, err.to_string())
}

fn guard(f: impl FnOnce() -> DivrecStatus) -> DivrecStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_owned());
            fail(DivrecStatus::Panic, msg)
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, DivrecStatus> {
    if p.is_null() {
        return Err(fail(DivrecStatus::NullPointer, format!("{what} is null")));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(fail(DivrecStatus::InvalidArgument, format!("{what} is not UTF-8"))),
    }
}

unsafe fn f64_slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], DivrecStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(DivrecStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, n))
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(DivrecStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

impl From<DivrecKernel> for Kernel {
    fn from(k: DivrecKernel) -> Self {
        match k {
            DivrecKernel::Kendall => Kernel::Kendall,
            DivrecKernel::Pearson => Kernel::Pearson,
        }
    }
}

impl From<DivrecMetric> for Metric {
    fn from(m: DivrecMetric) -> Self {
        match m {
            DivrecMetric::Variance => Metric::Variance,
            DivrecMetric::EntropyMl => Metric::EntropyMl,
            DivrecMetric::EntropyDirichlet => Metric::EntropyDirichlet,
            DivrecMetric::EntropyNsb => Metric::EntropyNsb,
            DivrecMetric::CompMaxProb => Metric::CompMaxProb,
            DivrecMetric::CompGini => Metric::CompGini,
        }
    }
}

impl From<DivrecLevel> for Level {
    fn from(l: DivrecLevel) -> Self {
        match l {
            DivrecLevel::User => Level::User,
            DivrecLevel::Pageview => Level::Pageview,
        }
    }
}

impl From<DivrecAlgorithm> for Algorithm {
    fn from(a: DivrecAlgorithm) -> Self {
        match a {
            DivrecAlgorithm::Cf => Algorithm::Cf,
            DivrecAlgorithm::Cfd => Algorithm::Cfd,
            DivrecAlgorithm::Popularity => Algorithm::GlobalPopularity,
            DivrecAlgorithm::Actual => Algorithm::ActualVisits,
        }
    }
}

impl From<&DivrecConfig> for ExperimentConfig {
    fn from(c: &DivrecConfig) -> Self {
        ExperimentConfig {
            split: match c.split {
                DivrecSplit::Random => SplitMode::Random {
                    train_fraction: c.train_fraction,
                    seed: c.seed,
                },
                DivrecSplit::Longitudinal => SplitMode::Longitudinal { boundary: c.boundary },
            },
            kernel: c.kernel.into(),
            n_neighbors: c.n_neighbors,
            metric: c.metric.into(),
            level: c.level.into(),
            restrict_to_train: c.restrict_to_train,
            a: c.a,
            psi: c.psi,
            t: c.has_t.then_some(c.t),
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn divrec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn divrec_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads traffic, survey, score and optional slant files into a panel.
///
/// `slants_path` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn divrec_panel_load(
    traffic_paths: *const *const c_char,
    n_traffic: usize,
    survey_path: *const c_char,
    scores_path: *const c_char,
    slants_path: *const c_char,
    min_visitors: usize,
    out: *mut *mut DivrecPanel,
) -> DivrecStatus {
    guard(|| {
        non_null!(traffic_paths, out);
        let mut traffic = Vec::with_capacity(n_traffic);
        for &p in slice::from_raw_parts(traffic_paths, n_traffic) {
            match path_arg(p, "traffic path") {
                Ok(p) => traffic.push(p),
                Err(s) => return s,
            }
        }
        let survey = match path_arg(survey_path, "survey_path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let scores = match path_arg(scores_path, "scores_path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let slants = if slants_path.is_null() {
            None
        } else {
            match path_arg(slants_path, "slants_path") {
                Ok(p) => Some(p),
                Err(s) => return s,
            }
        };
        match load_panel(&traffic, &survey, &scores, slants.as_deref(), min_visitors) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(DivrecPanel { inner }));
                DivrecStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Restores a panel from the JSON written by `divrec ingest`.
#[no_mangle]
pub unsafe extern "C" fn divrec_panel_from_json(json: *const c_char, out: *mut *mut DivrecPanel) -> DivrecStatus {
    guard(|| {
        non_null!(json, out);
        let Ok(s) = CStr::from_ptr(json).to_str() else {
            return fail(DivrecStatus::InvalidArgument, "json is not UTF-8");
        };
        match PanelDataset::from_json(s) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(DivrecPanel { inner }));
                DivrecStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn divrec_panel_free(panel: *mut DivrecPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Number of users; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn divrec_panel_n_users(panel: *const DivrecPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.inner.n_users())
}

/// Number of domains; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn divrec_panel_n_domains(panel: *const DivrecPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.inner.n_domains())
}

/// Index of a domain name (normalized the same way as on load).
#[no_mangle]
pub unsafe extern "C" fn divrec_panel_domain_index(
    panel: *const DivrecPanel,
    domain: *const c_char,
    out: *mut u32,
) -> DivrecStatus {
    guard(|| {
        non_null!(panel, domain, out);
        let Ok(name) = CStr::from_ptr(domain).to_str() else {
            return fail(DivrecStatus::InvalidArgument, "domain is not UTF-8");
        };
        match (*panel).inner.domain_index(name) {
            Some(i) => {
                *out = i;
                DivrecStatus::Ok
            }
            None => fail(DivrecStatus::InvalidArgument, format!("unknown domain {name:?}")),
        }
    })
}

#[no_mangle]
pub extern "C" fn divrec_config_default() -> DivrecConfig {
    let d = ExperimentConfig::default();
    let (train_fraction, seed) = match d.split {
        SplitMode::Random { train_fraction, seed } => (train_fraction, seed),
        SplitMode::Longitudinal { .. } => (0.7, 0),
    };
    DivrecConfig {
        split: DivrecSplit::Random,
        train_fraction,
        seed,
        boundary: 0,
        kernel: DivrecKernel::Kendall,
        n_neighbors: d.n_neighbors,
        metric: DivrecMetric::Variance,
        level: DivrecLevel::User,
        restrict_to_train: d.restrict_to_train,
        a: d.a,
        psi: d.psi,
        t: 0.0,
        has_t: false,
    }
}

/// Splits the panel, builds the similarity table and candidate sets.
///
/// The panel may be freed afterwards.
#[no_mangle]
pub unsafe extern "C" fn divrec_recommender_new(
    panel: *const DivrecPanel,
    config: *const DivrecConfig,
    out: *mut *mut DivrecRecommender,
) -> DivrecStatus {
    guard(|| {
        non_null!(panel, config, out);
        let cfg = ExperimentConfig::from(&*config);
        match Experiment::build(&(*panel).inner, &cfg) {
            Ok(experiment) => {
                *out = Box::into_raw(Box::new(DivrecRecommender { experiment }));
                DivrecStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn divrec_recommender_free(rec: *mut DivrecRecommender) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

unsafe fn check_cell(rec: &DivrecRecommender, user: u32, domain: u32) -> Result<(), DivrecStatus> {
    let m = rec.experiment.model.matrix();
    if user as usize >= m.n_users() || domain as usize >= m.n_domains() {
        return Err(fail(
            DivrecStatus::InvalidArgument,
            format!("cell ({user}, {domain}) outside {}x{}", m.n_users(), m.n_domains()),
        ));
    }
    Ok(())
}

/// CF rating prediction. `DIVREC_STATUS_UNDEFINED` when the user has no
/// training ratings or no neighbour rated the domain.
#[no_mangle]
pub unsafe extern "C" fn divrec_recommender_predict_cf(
    rec: *const DivrecRecommender,
    user: u32,
    domain: u32,
    out: *mut f64,
) -> DivrecStatus {
    guard(|| {
        non_null!(rec, out);
        let rec = &*rec;
        if let Err(s) = check_cell(rec, user, domain) {
            return s;
        }
        match rec.experiment.model.predict_cf(user, domain) {
            Some(v) => {
                *out = v;
                DivrecStatus::Ok
            }
            None => fail(DivrecStatus::Undefined, "no CF prediction for this cell"),
        }
    })
}

/// CF prediction plus the logistic diversity term of the domain.
#[no_mangle]
pub unsafe extern "C" fn divrec_recommender_predict_cfd(
    rec: *const DivrecRecommender,
    user: u32,
    domain: u32,
    out: *mut f64,
) -> DivrecStatus {
    guard(|| {
        non_null!(rec, out);
        let rec = &*rec;
        if let Err(s) = check_cell(rec, user, domain) {
            return s;
        }
        let e = &rec.experiment;
        let delta = e.diversity[domain as usize];
        match e.model.predict_cfd(user, domain, delta, &e.params) {
            Some(v) => {
                *out = v;
                DivrecStatus::Ok
            }
            None => fail(DivrecStatus::Undefined, "no CF prediction for this cell"),
        }
    })
}

/// Logistic location in use (configured, or the mean diversity).
#[no_mangle]
pub unsafe extern "C" fn divrec_recommender_location(rec: *const DivrecRecommender, out: *mut f64) -> DivrecStatus {
    guard(|| {
        non_null!(rec, out);
        *out = (*rec).experiment.params.t;
        DivrecStatus::Ok
    })
}

/// Ranked candidate list of `user` under `algorithm`.
///
/// Writes up to `capacity` domain indices to `domains` and, when not NULL,
/// their ranking scores to `scores`. `len` always receives the full list
/// length; `DIVREC_STATUS_BUFFER_TOO_SMALL` is returned if it exceeds
/// `capacity`. Users without candidates get an empty list.
#[no_mangle]
pub unsafe extern "C" fn divrec_recommender_rank(
    rec: *const DivrecRecommender,
    user: u32,
    algorithm: DivrecAlgorithm,
    domains: *mut u32,
    scores: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> DivrecStatus {
    guard(|| {
        non_null!(rec, len);
        let e = &(*rec).experiment;
        if user as usize >= e.model.matrix().n_users() {
            return fail(DivrecStatus::InvalidArgument, format!("user {user} out of range"));
        }
        let Ok(pos) = e.candidates.binary_search_by_key(&user, |c| c.user) else {
            *len = 0;
            return DivrecStatus::Ok;
        };
        let list = e.candidates[pos].rank(algorithm.into(), &e.popularity);
        *len = list.len();
        if list.len() > capacity {
            return fail(
                DivrecStatus::BufferTooSmall,
                format!("list has {} entries, capacity {capacity}", list.len()),
            );
        }
        if list.is_empty() {
            return DivrecStatus::Ok;
        }
        non_null!(domains);
        let d = slice::from_raw_parts_mut(domains, list.len());
        for (slot, entry) in d.iter_mut().zip(&list.entries) {
            *slot = entry.domain;
        }
        if !scores.is_null() {
            let s = slice::from_raw_parts_mut(scores, list.len());
            for (slot, entry) in s.iter_mut().zip(&list.entries) {
                *slot = entry.rating;
            }
        }
        DivrecStatus::Ok
    })
}

/// Diversity of a 7-bin partisanship histogram (`counts[j]` for `j = 1..7`).
#[no_mangle]
pub unsafe extern "C" fn divrec_diversity(counts: *const f64, metric: DivrecMetric, out: *mut f64) -> DivrecStatus {
    guard(|| {
        non_null!(counts, out);
        let mut h = [0.0; BINS];
        h.copy_from_slice(slice::from_raw_parts(counts, BINS));
        match metric_value(&h, metric.into()) {
            Ok(v) => {
                *out = v;
                DivrecStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Similarity `(1 + coefficient) / 2` of two equal-length vectors.
#[no_mangle]
pub unsafe extern "C" fn divrec_similarity(
    kernel: DivrecKernel,
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
) -> DivrecStatus {
    guard(|| {
        non_null!(out);
        let (x, y) = match (f64_slice(x, n, "x"), f64_slice(y, n, "y")) {
            (Ok(x), Ok(y)) => (x, y),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match Kernel::from(kernel).similarity(x, y) {
            Some(v) => {
                *out = v;
                DivrecStatus::Ok
            }
            None => fail(DivrecStatus::Undefined, "similarity undefined for constant or short vectors"),
        }
    })
}

/// Logistic re-ranking term `a / (1 + exp(-(delta - t) / psi))`.
#[no_mangle]
pub unsafe extern "C" fn divrec_logistic(a: f64, psi: f64, t: f64, delta: f64, out: *mut f64) -> DivrecStatus {
    guard(|| {
        non_null!(out);
        match LogisticParams::new(a, psi, t) {
            Ok(p) => {
                *out = p.g(delta);
                DivrecStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Rank discount `P(r) ∝ r^-alpha` for `r = 1..k`, written to `out[0..k]`.
#[no_mangle]
pub unsafe extern "C" fn divrec_discount(k: usize, alpha: f64, out: *mut f64) -> DivrecStatus {
    guard(|| {
        non_null!(out);
        match discount_distribution(k, alpha) {
            Ok(p) => {
                slice::from_raw_parts_mut(out, k).copy_from_slice(&p);
                DivrecStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Rank-discounted trust difference between two lists given as the trust
/// scores of their entries in rank order. Uses the first
/// `min(n_rec, n_base)` ranks.
#[no_mangle]
pub unsafe extern "C" fn divrec_delta_q(
    rec_scores: *const f64,
    n_rec: usize,
    base_scores: *const f64,
    n_base: usize,
    alpha: f64,
    out: *mut f64,
) -> DivrecStatus {
    guard(|| {
        non_null!(out);
        let (rec, base) = match (f64_slice(rec_scores, n_rec, "rec_scores"), f64_slice(base_scores, n_base, "base_scores")) {
            (Ok(r), Ok(b)) => (r, b),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let k = n_rec.min(n_base);
        let p = match discount_distribution(k, alpha) {
            Ok(p) => p,
            Err(e) => return from_error(e),
        };
        *out = p.iter().zip(rec.iter().zip(base)).map(|(w, (a, b))| w * (a - b)).sum();
        DivrecStatus::Ok
    })
}
