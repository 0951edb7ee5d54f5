use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided.
    pub p: f64,
    pub n: usize,
}

/// Two-sided p-value of a Student t statistic.
pub(crate) fn t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

fn correlation_p(r: f64, df: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t = r * (df as f64 / (1.0 - r * r)).sqrt();
    t_two_sided(t, df as f64)
}

fn raw_r(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn check(lens: &[usize], min: usize) -> Result<usize> {
    let n = lens[0];
    if lens.iter().any(|&l| l != n) {
        return Err(Error::invalid("correlation inputs differ in length"));
    }
    if n < min {
        return Err(Error::invalid(format!("correlation needs at least {min} observations, got {n}")));
    }
    Ok(n)
}

/// Pearson correlation with a t-based two-sided p-value (`n − 2` df).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    let n = check(&[x.len(), y.len()], 3)?;
    let r = raw_r(x, y).ok_or_else(|| Error::Degenerate("zero variance in correlation input".into()))?;
    Ok(Correlation {
        r,
        p: correlation_p(r, n - 2),
        n,
    })
}

/// First-order partial correlation of `x` and `y` given `z` (`n − 3` df).
pub fn partial_correlation(x: &[f64], y: &[f64], z: &[f64]) -> Result<Correlation> {
    let n = check(&[x.len(), y.len(), z.len()], 4)?;
    let zero = || Error::Degenerate("zero variance in correlation input".into());
    let rxy = raw_r(x, y).ok_or_else(zero)?;
    let rxz = raw_r(x, z).ok_or_else(zero)?;
    let ryz = raw_r(y, z).ok_or_else(zero)?;
    let den = (1.0 - rxz * rxz) * (1.0 - ryz * ryz);
    if 1.0 - rxz.abs() < 1e-12 || 1.0 - ryz.abs() < 1e-12 {
        return Err(Error::Degenerate("control variable is collinear with an input".into()));
    }
    let r = ((rxy - rxz * ryz) / den.sqrt()).clamp(-1.0, 1.0);
    Ok(Correlation {
        r,
        p: correlation_p(r, n - 3),
        n,
    })
}
