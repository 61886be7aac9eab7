use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Ordinary least squares of accuracy on `ln(params)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Two-sided p-value of the slope t-test with `n − 2` degrees of freedom.
    pub p_value: f64,
    pub n: usize,
}

/// Two-sided tail probability `P(|T| ≥ |t|)` for Student's t with `df`
/// degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t))
}

/// Fits `y = intercept + slope · x` by least squares.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<RegressionResult> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::InvalidArgument(format!("{n} x values, {} y values", y.len())));
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!("regression needs at least 3 points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("scaling_regression input"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let df = nf - 2.0;
    let (r2, p_value) = if syy == 0.0 {
        (0.0, 1.0)
    } else {
        let r2 = (1.0 - sse / syy).clamp(0.0, 1.0);
        let se = (sse / df / sxx).sqrt();
        let t = if se == 0.0 { f64::INFINITY } else { slope / se };
        (r2, student_t_two_sided(t, df))
    };
    Ok(RegressionResult {
        slope,
        intercept,
        r2,
        p_value,
        n,
    })
}

/// Regression of accuracy on the natural log of the parameter count.
pub fn scaling_regression(points: &[(f64, f64)]) -> Result<RegressionResult> {
    if let Some(&(p, _)) = points.iter().find(|(p, _)| !(*p > 0.0)) {
        return Err(Error::InvalidArgument(format!("parameter count {p} must be positive")));
    }
    let x: Vec<f64> = points.iter().map(|(p, _)| p.ln()).collect();
    let y: Vec<f64> = points.iter().map(|(_, a)| *a).collect();
    linear_regression(&x, &y)
}
