//! Diversity estimators over a 7-bin partisanship histogram.
//!
//! Bin `j` (0-based) holds the mass of partisanship value `j + 1`. At user
//! level the mass is the number of distinct visitors, at pageview level their
//! pageviews, so every estimator is a function of the histogram alone.

use super::BINS;
use crate::error::{Error, Result};

pub type Histogram = [f64; BINS];

fn total(h: &Histogram) -> Result<f64> {
    if h.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid("histogram entries must be finite and nonnegative"));
    }
    let t: f64 = h.iter().sum();
    if t > 0.0 {
        Ok(t)
    } else {
        Err(Error::EmptyProfile)
    }
}

/// Mass-weighted mean partisanship on the 1..7 scale.
pub fn mean_partisanship(h: &Histogram) -> Result<f64> {
    let t = total(h)?;
    Ok(h.iter()
        .enumerate()
        .map(|(j, &x)| (j + 1) as f64 * x)
        .sum::<f64>()
        / t)
}

/// Population variance of partisanship (denominator: total mass).
pub fn variance(h: &Histogram) -> Result<f64> {
    let t = total(h)?;
    let mean = mean_partisanship(h)?;
    Ok(h.iter()
        .enumerate()
        .map(|(j, &x)| {
            let dev = (j + 1) as f64 - mean;
            x * dev * dev
        })
        .sum::<f64>()
        / t)
}

fn plug_in_entropy(p: impl Iterator<Item = f64>) -> f64 {
    -p.filter(|&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Maximum-likelihood (plug-in) Shannon entropy in nats.
pub fn entropy_ml(h: &Histogram) -> Result<f64> {
    let t = total(h)?;
    Ok(plug_in_entropy(h.iter().map(|&x| x / t)))
}

/// Plug-in entropy of the Dirichlet(α) posterior mean
/// `p_j = (h_j + α) / (H + 7α)`.
pub fn entropy_dirichlet(h: &Histogram, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("Dirichlet alpha must be positive, got {alpha}")));
    }
    let t = total(h)?;
    let denom = t + BINS as f64 * alpha;
    Ok(plug_in_entropy(h.iter().map(|&x| (x + alpha) / denom)))
}

/// `1 - max_j p_j`.
pub fn comp_max_prob(h: &Histogram) -> Result<f64> {
    let t = total(h)?;
    let max = h.iter().copied().fold(0.0, f64::max);
    Ok(1.0 - max / t)
}

/// Gini coefficient over all seven bins, zeros included:
/// `Σ_i Σ_j |x_i - x_j| / (2 · 7 · Σ x)`.
pub fn gini(h: &Histogram) -> Result<f64> {
    let t = total(h)?;
    // sorted-order form of the pairwise sum: Σ_i (2i - n + 1) x_(i)
    let mut sorted = *h;
    sorted.sort_by(f64::total_cmp);
    let n = BINS as f64;
    let pairwise: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (2.0 * i as f64 - n + 1.0) * x)
        .sum::<f64>()
        * 2.0;
    Ok(pairwise / (2.0 * n * t))
}

/// `1 - G`.
pub fn comp_gini(h: &Histogram) -> Result<f64> {
    Ok(1.0 - gini(h)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN7: f64 = 1.945_910_149_055_313_3;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn variance_cases() {
        close(variance(&[0., 0., 0., 5., 0., 0., 0.]).unwrap(), 0.0, 0.0);
        close(variance(&[1., 0., 0., 0., 0., 0., 1.]).unwrap(), 9.0, 1e-15);
        let weighted = [1., 0., 0., 0., 0., 0., 3.];
        close(mean_partisanship(&weighted).unwrap(), 5.5, 1e-15);
        close(variance(&weighted).unwrap(), 0.25 * 4.5 * 4.5 + 0.75 * 1.5 * 1.5, 1e-12);
        close(variance(&weighted).unwrap(), 6.75, 1e-12);
    }

    #[test]
    fn entropy_cases() {
        close(entropy_ml(&[1.; 7]).unwrap(), LN7, 1e-15);
        close(entropy_ml(&[5., 0., 0., 0., 0., 0., 0.]).unwrap(), 0.0, 0.0);
        let expected = -(0.5 * 0.5f64.ln() + 2.0 * 0.25 * 0.25f64.ln());
        close(entropy_ml(&[2., 1., 1., 0., 0., 0., 0.]).unwrap(), expected, 1e-15);
    }

    #[test]
    fn dirichlet_cases() {
        let h = [7., 0., 0., 0., 0., 0., 0.];
        let expected = -(4.0 / 7.0) * (4.0f64 / 7.0).ln() - 6.0 * (1.0 / 14.0) * (1.0f64 / 14.0).ln();
        close(entropy_dirichlet(&h, 1.0).unwrap(), expected, 1e-14);
        for alpha in [0.1, 1.0, 3.0] {
            close(entropy_dirichlet(&[1.; 7], alpha).unwrap(), LN7, 1e-14);
        }
        let h = [2., 1., 1., 0., 0., 0., 0.];
        close(entropy_dirichlet(&h, 1e-9).unwrap(), entropy_ml(&h).unwrap(), 1e-6);
        assert!(entropy_dirichlet(&h, 0.0).is_err());
        assert!(entropy_dirichlet(&h, -1.0).is_err());
    }

    #[test]
    fn max_prob_cases() {
        close(comp_max_prob(&[1.; 7]).unwrap(), 6.0 / 7.0, 1e-15);
        close(comp_max_prob(&[4., 0., 0., 0., 0., 0., 0.]).unwrap(), 0.0, 0.0);
        close(comp_max_prob(&[3., 1., 0., 0., 0., 0., 0.]).unwrap(), 0.25, 1e-15);
    }

    fn gini_brute(h: &Histogram) -> f64 {
        let mut s = 0.0;
        for a in h {
            for b in h {
                s += (a - b).abs();
            }
        }
        s / (2.0 * 7.0 * h.iter().sum::<f64>())
    }

    #[test]
    fn gini_cases() {
        close(comp_gini(&[3.; 7]).unwrap(), 1.0, 1e-15);
        close(comp_gini(&[9., 0., 0., 0., 0., 0., 0.]).unwrap(), 1.0 / 7.0, 1e-15);
        let h = [2., 2., 0., 0., 0., 0., 0.];
        close(gini(&h).unwrap(), gini_brute(&h), 1e-15);
        close(comp_gini(&h).unwrap(), 1.0 - 20.0 / 28.0, 1e-15);
    }

    #[test]
    fn gini_matches_pairwise_form() {
        let h = [0.5, 3.0, 0.0, 7.25, 1.0, 0.0, 2.0];
        close(gini(&h).unwrap(), gini_brute(&h), 1e-14);
    }

    #[test]
    fn empty_histogram_is_an_error() {
        let z = [0.0; 7];
        assert!(matches!(variance(&z), Err(Error::EmptyProfile)));
        assert!(matches!(entropy_ml(&z), Err(Error::EmptyProfile)));
        assert!(matches!(comp_gini(&z), Err(Error::EmptyProfile)));
        assert!(comp_max_prob(&[-1., 2., 0., 0., 0., 0., 0.]).is_err());
    }
}
