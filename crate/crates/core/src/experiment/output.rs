//! CSV and plot-data writers. Floats use Rust's shortest round-trip
//! formatting, so equal values always print identically.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::{ErrorSeries, LocalizationState};
use crate::experiment::fit::RateFit;
use crate::experiment::study::EnsembleResult;
use crate::experiment::tail::TailRow;
use crate::integrator::CoupledTrajectory;

pub const RESULTS_HEADER: &str = "alpha,mean_loc_err,sem,mean_eps,tau_full_frac,blowups";
pub const SERIES_HEADER: &str = "t,eps_sup,eps_int,m1,y,IV,I4";
pub const TAIL_HEADER: &str = "n,alpha,gamma_n,threshold,exceed,samples,freq,wilson_low,wilson_high";

/// One row per α, then `fit,slope,intercept,residual,ci_low,ci_high`.
pub fn results_csv(ensemble: &EnsembleResult, fit: Option<&RateFit>) -> String {
    let mut s = String::new();
    writeln!(s, "{RESULTS_HEADER}").unwrap();
    for l in &ensemble.levels {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            l.alpha, l.mean_loc_err, l.sem, l.mean_eps, l.tau_full_frac, l.blowups
        )
        .unwrap();
    }
    match fit {
        Some(f) => writeln!(s, "fit,{},{},{},{},{}", f.slope, f.intercept, f.residual, f.ci_low, f.ci_high),
        None => writeln!(s, "fit,NaN,NaN,NaN,NaN,NaN"),
    }
    .unwrap();
    s
}

/// Two columns: `ln α` and `ln sqrt(mean localized error)`.
pub fn plot_data(ensemble: &EnsembleResult) -> String {
    let mut s = String::from("# ln_alpha ln_sqrt_mean_loc_err\n");
    for (a, e) in ensemble.rate_points() {
        writeln!(s, "{} {}", a.ln(), e.ln()).unwrap();
    }
    s
}

pub fn tail_csv(rows: &[TailRow]) -> String {
    let mut s = String::new();
    writeln!(s, "{TAIL_HEADER}").unwrap();
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.n, r.alpha, r.gamma, r.threshold, r.exceed, r.samples, r.freq, r.wilson_low, r.wilson_high
        )
        .unwrap();
    }
    s
}

/// Time series of one level; `eps_int` is the running integral itself.
pub fn series_csv(traj: &CoupledTrajectory, alpha: f64, stride: usize) -> Result<String> {
    let level = traj
        .level(alpha)
        .ok_or_else(|| Error::Data(format!("no level with alpha {alpha}")))?;
    let err = ErrorSeries::from_level(level, traj.dt);
    let loc = LocalizationState::from_level(level, traj.dt);
    let mut s = String::new();
    writeln!(s, "{SERIES_HEADER}").unwrap();
    for m in (0..=traj.steps).filter(|m| m % stride.max(1) == 0 || *m == traj.steps) {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            traj.time(m),
            err.sup_part[m],
            err.int_part[m],
            level.monitors[m].m1,
            level.monitors[m].y,
            loc.iv[m],
            loc.i4[m]
        )
        .unwrap();
    }
    Ok(s)
}

pub fn write_series_csv(path: &Path, traj: &CoupledTrajectory, alpha: f64, stride: usize) -> Result<()> {
    fs::write(path, series_csv(traj, alpha, stride)?)?;
    Ok(())
}
