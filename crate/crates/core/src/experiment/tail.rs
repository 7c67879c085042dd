//! Exceedance frequencies `P(ε_n(T) >= Γ_n α_n)` along the α grid.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::experiment::config::GammaSeq;
use crate::experiment::study::EnsembleResult;

#[derive(Clone, Debug, PartialEq)]
pub struct TailRow {
    /// Position along the decreasing α grid, starting at 1.
    pub n: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub threshold: f64,
    pub exceed: usize,
    pub samples: usize,
    pub freq: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

/// 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = Normal::standard().inverse_cdf(0.975);
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Tail table from `eps[sample][level]` with levels in decreasing α order.
pub fn tail_table(alphas: &[f64], eps: &[Vec<f64>], gamma: &GammaSeq) -> Vec<TailRow> {
    alphas
        .iter()
        .enumerate()
        .map(|(k, &alpha)| {
            let n = k + 1;
            let g = gamma.value(n);
            let threshold = g * alpha;
            let exceed = eps.iter().filter(|e| e[k] >= threshold).count();
            let (wilson_low, wilson_high) = wilson_interval(exceed, eps.len());
            TailRow {
                n,
                alpha,
                gamma: g,
                threshold,
                exceed,
                samples: eps.len(),
                freq: exceed as f64 / eps.len().max(1) as f64,
                wilson_low,
                wilson_high,
            }
        })
        .collect()
}

pub fn tail_study(ensemble: &EnsembleResult, gamma: &GammaSeq) -> Vec<TailRow> {
    let eps: Vec<Vec<f64>> = ensemble.samples.iter().map(|s| s.eps.clone()).collect();
    tail_table(&ensemble.alphas(), &eps, gamma)
}
