//! Log-log least squares for empirical convergence orders.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Euclidean norm of the log residuals.
    pub residual: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

impl RateFit {
    pub fn ci_contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

/// Fit `log e = intercept + slope log α` with a 95% t-interval on the slope.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::Data(format!("rate fit needs at least 3 points, got {}", points.len())));
    }
    for &(a, e) in points {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Data(format!("non-positive or non-finite alpha {a}")));
        }
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::Data(format!("non-positive or non-finite error {e} at alpha {a}")));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Data("all alpha values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let dof = n - 2.0;
    let se = (rss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Data(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(RateFit {
        slope,
        intercept,
        residual: rss.sqrt(),
        ci_low: slope - t * se,
        ci_high: slope + t * se,
        points: points.len(),
    })
}
