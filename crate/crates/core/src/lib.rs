//! Diversity-aware collaborative filtering for news domains.
//!
//! The crate turns raw browsing traffic, partisanship survey answers and
//! domain reliability scores into:
//!
//! * per-domain audience partisan diversity under six estimators ([`diversity`]),
//! * user-based CF predictions and the diversity re-ranked CF+D variant ([`recommender`]),
//! * the offline evaluation protocol: trustworthiness, precision, RMSE,
//!   rank-discounted ΔQ, a resampling null and partisan false-positive rates
//!   ([`evaluation`]),
//! * the observational analyses: correlations, partial correlations,
//!   standardized OLS and user stratification ([`stats`]).
//!
//! [`synth`] generates panels with a planted diversity/reliability effect so the
//! whole pipeline runs without licensed data, and [`pipeline`] wires the
//! modules together the same way the `divrec` binary does.

pub mod diversity;
pub mod error;
pub mod evaluation;
pub mod ingest;
pub mod pipeline;
pub mod recommender;
pub mod report;
pub mod similarity;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
