//! Log-log least squares.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; 0 for an exact fit through three or more points.
    pub stderr: f64,
    pub points_used: usize,
    pub warnings: Vec<String>,
}

/// OLS of `ln risk` on `ln scale`. Points with non-positive or non-finite
/// values are dropped with a warning; at least three must remain.
pub fn fit_rate_loglog(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 3 {
        return Err(invalid(format!(
            "log-log fit needs >= 3 points, got {}",
            points.len()
        )));
    }
    let mut warnings = Vec::new();
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(s, r) in points {
        if s > 0.0 && r > 0.0 && s.is_finite() && r.is_finite() {
            xs.push(s.ln());
            ys.push(r.ln());
        } else {
            warnings.push(format!("dropped point ({s}, {r})"));
        }
    }
    let m = xs.len();
    if m < 3 {
        return Err(invalid(format!(
            "only {m} usable points after dropping non-positive values"
        )));
    }
    let mf = m as f64;
    let mx = xs.iter().sum::<f64>() / mf;
    let my = ys.iter().sum::<f64>() / mf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("all scales are equal"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (rss / (mf - 2.0) / sxx).sqrt();
    Ok(LogLogFit {
        slope,
        intercept,
        stderr,
        points_used: m,
        warnings,
    })
}
