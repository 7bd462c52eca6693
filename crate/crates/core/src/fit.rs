//! Ordinary least squares on small data sets.

use serde::{Deserialize, Serialize};

use crate::linalg::solve_least_squares;
use crate::{Error, Result};

/// `y ≈ slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Root-mean-square residual.
    pub rms: f64,
    pub n: usize,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Shape(format!("{} abscissae, {} ordinates", n, y.len())));
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!("line fit needs 2 points, got {n}")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (r2, rms) = quality(y, &x.iter().map(|v| slope * v + intercept).collect::<Vec<_>>());
    Ok(LineFit { slope, intercept, r2, rms, n })
}

/// General linear model `y ≈ Σ_k c_k f_k(x)` given the design matrix rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModelFit {
    pub coefficients: Vec<f64>,
    /// Standard errors of the coefficients (NaN when there are no spare
    /// degrees of freedom).
    pub std_errors: Vec<f64>,
    pub r2: f64,
    pub rms: f64,
    pub rss: f64,
    /// Bayesian information criterion `n ln(RSS/n) + k ln n`.
    pub bic: f64,
    pub n: usize,
}

pub fn fit_linear_model(design: &[Vec<f64>], y: &[f64]) -> Result<LinearModelFit> {
    let n = y.len();
    let k = design.first().map_or(0, Vec::len);
    if design.len() != n || design.iter().any(|r| r.len() != k) {
        return Err(Error::Shape("ragged design matrix".into()));
    }
    if n < k || k == 0 {
        return Err(Error::InsufficientData(format!("{n} samples for {k} coefficients")));
    }
    let (coefficients, cov_diag) = solve_least_squares(design, y)?;
    let pred: Vec<f64> = design.iter().map(|r| r.iter().zip(&coefficients).map(|(a, c)| a * c).sum()).collect();
    let rss: f64 = y.iter().zip(&pred).map(|(a, b)| (a - b).powi(2)).sum();
    let (r2, rms) = quality(y, &pred);
    let dof = n - k;
    let sigma2 = if dof > 0 { rss / dof as f64 } else { f64::NAN };
    let std_errors = cov_diag.iter().map(|c| (c * sigma2).sqrt()).collect();
    let nf = n as f64;
    let bic = nf * (rss.max(f64::MIN_POSITIVE) / nf).ln() + k as f64 * nf.ln();
    Ok(LinearModelFit { coefficients, std_errors, r2, rms, rss, bic, n })
}

fn quality(y: &[f64], pred: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res == 0.0 { 1.0 } else { 0.0 };
    (r2, (ss_res / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-13);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn model_recovers_coefficients() {
        let xs = [1.0, 2.0, 4.0, 7.0, 9.0];
        let design: Vec<Vec<f64>> = xs.iter().map(|&x: &f64| vec![x, x.ln(), 1.0]).collect();
        let y: Vec<f64> = xs.iter().map(|&x: &f64| 0.3 * x - 1.2 * x.ln() + 4.0).collect();
        let f = fit_linear_model(&design, &y).unwrap();
        for (c, e) in f.coefficients.iter().zip([0.3, -1.2, 4.0]) {
            assert!((c - e).abs() < 1e-10);
        }
    }
}
