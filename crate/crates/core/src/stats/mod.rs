//! Observational statistics: correlations, standardized regressions,
//! two-sample tests and user stratification.

mod analysis;
mod correlation;
mod ols;
mod stratify;

use serde::{Deserialize, Serialize};

pub use analysis::{
    correlation_report, domain_observations, regression_report, CorrelationRow, DomainObservation,
    RegressionRow,
};
pub use correlation::{partial_correlation, pearson, Correlation};
pub use ols::{ols_standardized, standardize, OlsFit, OlsTerm};
pub use stratify::{
    stratified_delta_q, stratify, terciles, user_statistic, Stratum, StratumDeltaQ, StratumKey,
};

use correlation::t_two_sided;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Unequal-variance two-sample t test of `mean(a) − mean(b)`.
///
/// `None` when either sample has fewer than two values or both are constant.
pub fn welch(a: &[f64], b: &[f64]) -> Option<WelchTest> {
    let moments = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (n, m, v)
    };
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (na, ma, va) = moments(a);
    let (nb, mb, vb) = moments(b);
    let (sa, sb) = (va / na, vb / nb);
    let s = sa + sb;
    if s <= 0.0 {
        return None;
    }
    let t = (ma - mb) / s.sqrt();
    let df = s * s / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Some(WelchTest {
        t,
        df,
        p: t_two_sided(t, df),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welch_reference() {
        // scipy.stats.ttest_ind([1,2,3,4], [2,4,6,8,10], equal_var=False)
        // -> statistic -2.2514363231593695, pvalue 0.06913359319239236, df 5.520787746170677
        let w = welch(&[1., 2., 3., 4.], &[2., 4., 6., 8., 10.]).unwrap();
        assert!((w.t + 2.2514363231593695).abs() < 1e-12);
        assert!((w.df - 5.520787746170677).abs() < 1e-10);
        assert!((w.p - 0.06913359319239236).abs() < 1e-8, "{}", w.p);
        assert!(welch(&[1.0], &[1.0, 2.0]).is_none());
        assert!(welch(&[1.0, 1.0], &[1.0, 1.0]).is_none());
    }
}
