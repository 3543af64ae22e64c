//! Empirical convergence rates from log-log least squares.

use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits `log v ≈ a + s·log k`.
pub fn slope_fit(ks: &[f64], values: &[f64]) -> Result<SlopeFit> {
    if ks.len() != values.len() {
        return Err(Error::param(format!(
            "slope fit needs paired data: {} abscissae, {} values",
            ks.len(),
            values.len()
        )));
    }
    let pts: Vec<(f64, f64)> = ks.iter().copied().zip(values.iter().copied()).collect();
    slope_fit_points(&pts)
}

pub fn slope_fit_points(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < MIN_POINTS {
        return Err(Error::param(format!(
            "slope fit needs at least {MIN_POINTS} points, got {}",
            points.len()
        )));
    }
    if let Some((k, v)) = points.iter().find(|(k, v)| !(*k > 0.0) || !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::param(format!(
            "slope fit needs positive finite data, got ({k}, {v})"
        )));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::param("slope fit needs at least two distinct abscissae"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let ks: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let vs: Vec<f64> = ks.iter().map(|k| 3.0 / k).collect();
        let f = slope_fit(&ks, &vs).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let ks: Vec<f64> = (1..=9).map(|k| k as f64).collect();
        assert!(slope_fit(&ks, &ks).is_err());
        let ks: Vec<f64> = (1..=12).map(|k| k as f64).collect();
        let mut vs = ks.clone();
        vs[3] = 0.0;
        assert!(slope_fit(&ks, &vs).unwrap_err().to_string().contains("positive"));
    }
}
