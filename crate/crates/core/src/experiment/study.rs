//! Monte Carlo ensembles over the α grid, threshold calibration and the
//! aggregated per-α statistics.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{localized_error_series, Criterion, ErrorSeries, LocalizationState};
use crate::experiment::config::{StudyConfig, Threshold};
use crate::experiment::fit::{fit_rate, RateFit};
use crate::experiment::output::write_series_csv;
use crate::integrator::{run_coupled_observed, CoupledTrajectory, SimParams};
use crate::noise::NoiseStream;
use crate::snapshot::SnapshotWriter;

/// Pilot samples use ids from here on, disjoint from study samples.
pub const PILOT_SAMPLE_OFFSET: u64 = 1 << 40;

/// Smallest pilot ensemble accepted by [`calibrate_r`].
pub const MIN_PILOT: usize = 16;

/// Per-sample functionals, one entry per α in config order.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleOutcome {
    pub sample: u64,
    pub loc_err: Vec<f64>,
    pub eps: Vec<f64>,
    pub tau_full: Vec<bool>,
    /// Localization integral over the whole horizon.
    pub integral: Vec<f64>,
    pub max_m1: Vec<f64>,
    pub max_y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelSummary {
    pub alpha: f64,
    pub mean_loc_err: f64,
    pub sem: f64,
    pub mean_eps: f64,
    pub tau_full_frac: f64,
    pub blowups: usize,
    pub max_m1: f64,
    pub max_y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub threshold: f64,
    pub criterion: Criterion,
    pub levels: Vec<LevelSummary>,
    /// Completed samples in index order.
    pub samples: Vec<SampleOutcome>,
    /// Samples dropped after a blow-up (exploratory runs only).
    pub blown_up: Vec<u64>,
}

impl EnsembleResult {
    pub fn alphas(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.alpha).collect()
    }

    pub fn level(&self, alpha: f64) -> Option<&LevelSummary> {
        self.levels.iter().find(|l| l.alpha == alpha)
    }

    /// `(α, sqrt(mean localized error))` pairs.
    pub fn rate_points(&self) -> Vec<(f64, f64)> {
        self.levels.iter().map(|l| (l.alpha, l.mean_loc_err.sqrt())).collect()
    }

    /// `(α, mean ε_α(T))` pairs.
    pub fn eps_points(&self) -> Vec<(f64, f64)> {
        self.levels.iter().map(|l| (l.alpha, l.mean_eps)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub threshold: f64,
    pub pilot_samples: usize,
    /// Pilot quantile the threshold was scaled from.
    pub quantile: f64,
    /// `max_α mean I(T) / R`, the Markov bound on `P(τ_R < T)`.
    pub markov_ratio: f64,
    /// Fraction of pilot samples with `τ_R < T` at some α.
    pub stopped_frac: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyReport {
    pub calibration: Option<Calibration>,
    pub ensemble: EnsembleResult,
    /// Fit of `sqrt(mean localized error)` against α.
    pub fit: Option<RateFit>,
    /// Fit of mean `ε_α(T)` against α.
    pub eps_fit: Option<RateFit>,
}

/// Optional per-sample file output.
#[derive(Clone, Debug, Default)]
pub struct Dumps {
    pub series_dir: Option<PathBuf>,
    pub snapshot_dir: Option<PathBuf>,
}

/// Apply `f` to every sample id, in parallel unless `threads == 1`; the
/// output keeps the input order.
fn map_samples<T, F>(ids: &[u64], threads: usize, f: F) -> Result<Vec<Result<T>>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    if threads == 1 {
        return Ok(ids.iter().map(|&s| f(s)).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| ids.par_iter().map(|&s| f(s)).collect()))
}

pub fn run_sample(params: &SimParams, master_seed: u64, sample: u64, dumps: &Dumps, snapshot_stride: usize, series_stride: usize) -> Result<CoupledTrajectory> {
    let stream = NoiseStream::new(master_seed, sample);
    let traj = match (&dumps.snapshot_dir, snapshot_stride) {
        (Some(dir), k) if k > 0 => {
            let mut w = SnapshotWriter::create(&dir.join(format!("sample_{sample}.bin")), params, k)?;
            let t = run_coupled_observed(params, stream, |s| w.observe(s))?;
            w.finish()?;
            t
        }
        _ => run_coupled_observed(params, stream, |_| Ok(()))?,
    };
    if let Some(dir) = &dumps.series_dir {
        for level in &traj.levels {
            let path = dir.join(format!("series_s{sample}_a{}.csv", level.alpha));
            write_series_csv(&path, &traj, level.alpha, series_stride)?;
        }
    }
    Ok(traj)
}

fn outcome(traj: &CoupledTrajectory, r: f64, criterion: Criterion) -> SampleOutcome {
    let n = traj.levels.len();
    let mut out = SampleOutcome {
        sample: traj.sample,
        loc_err: Vec::with_capacity(n),
        eps: Vec::with_capacity(n),
        tau_full: Vec::with_capacity(n),
        integral: Vec::with_capacity(n),
        max_m1: Vec::with_capacity(n),
        max_y: Vec::with_capacity(n),
    };
    for level in &traj.levels {
        let loc = LocalizationState::from_level(level, traj.dt);
        out.loc_err
            .push(localized_error_series(&level.delta_h, &level.delta_v2, &loc, r, criterion));
        out.eps.push(ErrorSeries::from_level(level, traj.dt).eps_final());
        out.tau_full.push(loc.reaches_horizon(r, criterion));
        out.integral.push(loc.total(criterion));
        out.max_m1.push(level.monitors.iter().map(|m| m.m1).fold(0.0, f64::max));
        out.max_y.push(level.monitors.iter().map(|m| m.y).fold(0.0, f64::max));
    }
    out
}

fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Run the ensemble for samples `0..config.samples` with threshold `r`.
pub fn run_ensemble(config: &StudyConfig, params: &SimParams, r: f64, dumps: &Dumps) -> Result<EnsembleResult> {
    let ids: Vec<u64> = (0..config.samples as u64).collect();
    let results = map_samples(&ids, config.threads, |s| {
        let traj = run_sample(params, config.master_seed, s, dumps, config.snapshot_stride, config.series_stride)?;
        Ok(outcome(&traj, r, config.criterion))
    })?;

    let alphas = &params.alphas;
    let mut samples = Vec::with_capacity(ids.len());
    let mut blown_up = Vec::new();
    let mut blowups = vec![0usize; alphas.len()];
    for (res, &id) in results.into_iter().zip(&ids) {
        match res {
            Ok(o) => samples.push(o),
            Err(Error::BlowUp { alpha, .. }) if config.exploratory => {
                blown_up.push(id);
                for (k, a) in alphas.iter().enumerate() {
                    if alpha.is_none() || alpha == Some(*a) {
                        blowups[k] += 1;
                    }
                }
            }
            Err(e) => return Err(e),
        }
    }
    if samples.is_empty() {
        return Err(Error::Data("every sample blew up".into()));
    }

    let levels = alphas
        .iter()
        .enumerate()
        .map(|(k, &alpha)| {
            let col = |f: fn(&SampleOutcome, usize) -> f64| samples.iter().map(|s| f(s, k)).collect::<Vec<f64>>();
            let (mean_loc_err, sem) = mean_sem(&col(|s, k| s.loc_err[k]));
            let (mean_eps, _) = mean_sem(&col(|s, k| s.eps[k]));
            let full = samples.iter().filter(|s| s.tau_full[k]).count();
            LevelSummary {
                alpha,
                mean_loc_err,
                sem,
                mean_eps,
                tau_full_frac: full as f64 / samples.len() as f64,
                blowups: blowups[k],
                max_m1: col(|s, k| s.max_m1[k]).into_iter().fold(0.0, f64::max),
                max_y: col(|s, k| s.max_y[k]).into_iter().fold(0.0, f64::max),
            }
        })
        .collect();

    Ok(EnsembleResult {
        threshold: r,
        criterion: config.criterion,
        levels,
        samples,
        blown_up,
    })
}

/// Choose `R` from a pilot ensemble.
///
/// `R = r_headroom * q`, where `q` is the `ceil(0.95 m)`-th smallest of the
/// per-sample statistic `max_α I(T)` over `m` pilot samples. Every pilot
/// sample at or below `q` keeps `τ_R = T` at every α, so at most 5% of the
/// pilot is stopped early.
pub fn calibrate_r(config: &StudyConfig, params: &SimParams) -> Result<Calibration> {
    let m = config.pilot_samples;
    if m < MIN_PILOT {
        return Err(Error::Calibration(format!(
            "pilot ensemble of {m} samples is too small (need at least {MIN_PILOT})"
        )));
    }
    let ids: Vec<u64> = (0..m as u64).map(|i| PILOT_SAMPLE_OFFSET + i).collect();
    let totals: Vec<Vec<f64>> = map_samples(&ids, config.threads, |s| {
        let traj = run_sample(params, config.master_seed, s, &Dumps::default(), 0, 1)?;
        Ok(traj
            .levels
            .iter()
            .map(|l| LocalizationState::from_level(l, traj.dt).total(config.criterion))
            .collect())
    })?
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(calibrate_from_totals(&totals, config.r_headroom))
}

/// Calibration rule applied to pilot totals `totals[sample][level]`.
pub fn calibrate_from_totals(totals: &[Vec<f64>], headroom: f64) -> Calibration {
    let m = totals.len();
    let mut stat: Vec<f64> = totals.iter().map(|t| t.iter().copied().fold(0.0, f64::max)).collect();
    stat.sort_by(f64::total_cmp);
    let rank = ((0.95 * m as f64) - 1e-9).ceil() as usize;
    let quantile = stat[rank.clamp(1, m) - 1];
    let threshold = (headroom * quantile).max(f64::MIN_POSITIVE);
    let levels = totals.first().map_or(0, Vec::len);
    let max_mean = (0..levels)
        .map(|k| totals.iter().map(|t| t[k]).sum::<f64>() / m as f64)
        .fold(0.0, f64::max);
    let stopped = stat.iter().filter(|&&s| s >= threshold).count();
    Calibration {
        threshold,
        pilot_samples: m,
        quantile,
        markov_ratio: max_mean / threshold,
        stopped_frac: stopped as f64 / m as f64,
    }
}

pub fn resolve_threshold(config: &StudyConfig, params: &SimParams) -> Result<(f64, Option<Calibration>)> {
    match config.threshold {
        Threshold::Value(r) => Ok((r, None)),
        Threshold::Auto => {
            let c = calibrate_r(config, params)?;
            Ok((c.threshold, Some(c)))
        }
    }
}

/// Calibrate (if requested), run the ensemble and fit the rates.
pub fn run_study(config: &StudyConfig, dumps: &Dumps) -> Result<StudyReport> {
    let mut config = config.clone();
    config.validate()?;
    let params = config.sim_params()?;
    let (r, calibration) = resolve_threshold(&config, &params)?;
    let ensemble = run_ensemble(&config, &params, r, dumps)?;
    let fit = fit_rate(&ensemble.rate_points()).ok();
    let eps_fit = fit_rate(&ensemble.eps_points()).ok();
    Ok(StudyReport {
        calibration,
        ensemble,
        fit,
        eps_fit,
    })
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))
}
