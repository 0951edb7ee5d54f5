use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::correlation::t_two_sided;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsTerm {
    pub name: String,
    pub beta: f64,
    pub se: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    /// Intercept first, then predictors in input order.
    pub terms: Vec<OlsTerm>,
    pub r2: f64,
    pub n: usize,
}

impl OlsFit {
    pub fn term(&self, name: &str) -> Option<&OlsTerm> {
        self.terms.iter().find(|t| t.name == name)
    }
}

/// Z-scores with the sample standard deviation.
pub fn standardize(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("standardizing needs at least two observations"));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return Err(Error::RankDeficient);
    }
    Ok(x.iter().map(|v| (v - mean) / sd).collect())
}

/// OLS of `y` on z-scored predictors plus an intercept, via QR.
///
/// `y` is left on its own scale, so each slope is the change in `y` per
/// standard deviation of its predictor. Standard errors are classical.
pub fn ols_standardized(y: &[f64], predictors: &[(&str, &[f64])]) -> Result<OlsFit> {
    let n = y.len();
    let cols = predictors.len() + 1;
    if predictors.iter().any(|(_, x)| x.len() != n) {
        return Err(Error::invalid("regression columns differ in length"));
    }
    if n <= cols {
        return Err(Error::invalid(format!(
            "regression with {cols} coefficients needs more than {cols} observations, got {n}"
        )));
    }
    let mut design = DMatrix::<f64>::from_element(n, cols, 1.0);
    for (j, (_, x)) in predictors.iter().enumerate() {
        let z = standardize(x)?;
        design.set_column(j + 1, &DVector::from_vec(z));
    }
    let yv = DVector::from_column_slice(y);
    let qr = design.clone().qr();
    let r = qr.r();
    let scale = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..cols).any(|i| r[(i, i)].abs() <= 1e-10 * scale) {
        return Err(Error::RankDeficient);
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r.solve_upper_triangular(&qty).ok_or(Error::RankDeficient)?;
    let resid = &yv - &design * &beta;
    let rss = resid.norm_squared();
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let r2 = if cols == 1 {
        0.0
    } else if tss == 0.0 {
        return Err(Error::Degenerate("response has zero variance".into()));
    } else {
        1.0 - rss / tss
    };
    let df = (n - cols) as f64;
    let sigma2 = rss / df;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(cols, cols))
        .ok_or(Error::RankDeficient)?;
    let names = std::iter::once("intercept").chain(predictors.iter().map(|(name, _)| *name));
    let terms = names
        .enumerate()
        .map(|(i, name)| {
            let var = sigma2 * r_inv.row(i).iter().map(|v| v * v).sum::<f64>();
            let se = var.sqrt();
            let p = if se > 0.0 {
                t_two_sided(beta[i] / se, df)
            } else if beta[i] == 0.0 {
                1.0
            } else {
                0.0
            };
            OlsTerm {
                name: name.to_string(),
                beta: beta[i],
                se,
                p,
            }
        })
        .collect();
    Ok(OlsFit { terms, r2, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit() {
        let x = [1.0, 2.0, 4.0, 7.0, 11.0];
        let z = standardize(&x).unwrap();
        let y: Vec<f64> = z.iter().map(|v| 2.0 * v).collect();
        let fit = ols_standardized(&y, &[("x", &x)]).unwrap();
        assert!((fit.term("x").unwrap().beta - 2.0).abs() < 1e-12);
        assert!(fit.term("intercept").unwrap().beta.abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_is_mean() {
        let fit = ols_standardized(&[1.0, 2.0, 6.0], &[]).unwrap();
        assert!((fit.terms[0].beta - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let x2: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let y = [1.0, 3.0, 2.0, 5.0, 4.0];
        assert!(matches!(
            ols_standardized(&y, &[("a", &x), ("b", &x2)]),
            Err(Error::RankDeficient)
        ));
        assert!(matches!(
            ols_standardized(&y, &[("c", &[1.0; 5])]),
            Err(Error::RankDeficient)
        ));
    }
}
