//! Finite-`n` extrapolation of `-(1/n) log m_n`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::deviation::DeviationSeries;
use crate::error::{Error, Result};

/// Least-squares fit of `-(1/n) log m_n ≈ a + b·log(n)/n + c/n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    /// `a`, the asymptotic rate estimate.
    pub estimate: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Root mean square residual.
    pub residual: f64,
    /// Whether the fitted curve is monotone over the data range.
    pub monotone: bool,
    pub points: usize,
}

impl RateFit {
    pub fn model(&self, n: f64) -> f64 {
        self.a + self.b * n.ln() / n + self.c / n
    }
}

pub fn rate_fit(series: &DeviationSeries) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = series.points.iter().map(|p| (p.n as f64, p.mass)).collect();
    fit_points(&pts)
}

/// Fit from `(n, m_n)` pairs.
pub fn fit_points(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(Error::DegenerateFit(format!("need at least 4 points, got {}", points.len())));
    }
    if let Some(&(n, m)) = points.iter().find(|(_, m)| !(*m > 0.0) || *m > 1.0 || !m.is_finite()) {
        return Err(Error::DegenerateFit(format!("mass {m} at n = {n} is outside (0, 1]")));
    }
    let mut ns: Vec<f64> = points.iter().map(|p| p.0).collect();
    ns.sort_by(f64::total_cmp);
    ns.dedup();
    if ns.len() < 3 || ns[0] <= 0.0 {
        return Err(Error::DegenerateFit("need at least 3 distinct positive lengths".into()));
    }
    let rows = points.len();
    let x = DMatrix::from_fn(rows, 3, |i, j| {
        let n = points[i].0;
        match j {
            0 => 1.0,
            1 => n.ln() / n,
            _ => 1.0 / n,
        }
    });
    let y = DVector::from_iterator(rows, points.iter().map(|&(n, m)| -m.ln() / n));
    let coef = x
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?;
    let (a, b, c) = (coef[0], coef[1], coef[2]);
    let resid = &x * &coef - &y;
    let residual = (resid.norm_squared() / rows as f64).sqrt();
    let mut fit = RateFit { estimate: a, a, b, c, residual, monotone: true, points: rows };
    let (lo, hi) = (ns[0], *ns.last().unwrap());
    let grid: Vec<f64> = (0..=64).map(|i| fit.model(lo + (hi - lo) * i as f64 / 64.0)).collect();
    let increasing = grid.windows(2).all(|w| w[1] >= w[0] - 1e-15);
    let decreasing = grid.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    fit.monotone = increasing || decreasing;
    if !fit.estimate.is_finite() {
        return Err(Error::DegenerateFit("fit produced a non-finite estimate".into()));
    }
    Ok(fit)
}
