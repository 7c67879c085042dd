use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use leray_lab::estimators::{localized_error, ErrorSeries};
use leray_lab::experiment::output::{plot_data, results_csv, tail_csv, write_series_csv};
use leray_lab::experiment::study::{ensure_dir, resolve_threshold, run_sample, Dumps};
use leray_lab::experiment::{run_study, tail_study, StudyConfig, StudyReport};
use leray_lab::verify::operator_suite;
use leray_lab::Error;

/// Stochastic Navier-Stokes vs stochastic Leray-alpha on shared noise.
#[derive(Parser)]
#[command(name = "leray-lab", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Ensemble size.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Write per-trajectory time series CSVs.
    #[arg(long, global = true)]
    dump_series: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the operator invariant suite.
    VerifyOperators,
    /// Run one coupled trajectory and write its time series.
    Simulate,
    /// Run the ensemble and fit the convergence rate.
    ConvergenceStudy,
    /// Run the ensemble and tabulate tail frequencies.
    TailStudy,
}

fn load(common: &Common) -> leray_lab::Result<StudyConfig> {
    let mut cfg = match &common.config {
        Some(p) => StudyConfig::from_file(p)?,
        None => StudyConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    if let Some(m) = common.samples {
        cfg.samples = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dumps(cfg: &StudyConfig, series: bool) -> leray_lab::Result<Dumps> {
    let mut d = Dumps::default();
    if series {
        let dir = cfg.out_dir.join("series");
        ensure_dir(&dir)?;
        d.series_dir = Some(dir);
    }
    if cfg.snapshot_stride > 0 {
        let dir = cfg.out_dir.join("snapshots");
        ensure_dir(&dir)?;
        d.snapshot_dir = Some(dir);
    }
    Ok(d)
}

fn print_report(report: &StudyReport) {
    if let Some(c) = &report.calibration {
        println!(
            "calibrated R = {} from {} pilot samples (quantile {}, pilot stopped {}, markov ratio {})",
            c.threshold, c.pilot_samples, c.quantile, c.stopped_frac, c.markov_ratio
        );
    }
    let e = &report.ensemble;
    println!("R = {} ({} criterion), {} samples", e.threshold, e.criterion, e.samples.len());
    for l in &e.levels {
        println!(
            "alpha {:<8} mean_loc_err {:.6e} sem {:.3e} mean_eps {:.6e} tau_full {:.3} max_m1 {:.4} max_y {:.4}",
            l.alpha, l.mean_loc_err, l.sem, l.mean_eps, l.tau_full_frac, l.max_m1, l.max_y
        );
    }
    if let Some(f) = &report.fit {
        println!("slope of sqrt(mean loc err): {:.4} (95% CI {:.4} .. {:.4})", f.slope, f.ci_low, f.ci_high);
    }
    if let Some(f) = &report.eps_fit {
        println!("slope of mean eps(T): {:.4} (95% CI {:.4} .. {:.4})", f.slope, f.ci_low, f.ci_high);
    }
}

fn run(cli: &Cli) -> leray_lab::Result<bool> {
    let cfg = load(&cli.common)?;
    match cli.command {
        Command::VerifyOperators => {
            let checks = operator_suite(&cfg.grid, &cfg.noise, cfg.master_seed, 100)?;
            for c in &checks {
                println!("{c}");
            }
            Ok(checks.iter().all(|c| c.passed()))
        }
        Command::Simulate => {
            ensure_dir(&cfg.out_dir)?;
            let params = cfg.sim_params()?;
            let d = dumps(&cfg, false)?;
            let traj = run_sample(&params, cfg.master_seed, 0, &d, cfg.snapshot_stride, cfg.series_stride)?;
            let (r, _) = resolve_threshold(&cfg, &params)?;
            for level in &traj.levels {
                let path = cfg.out_dir.join(format!("series_a{}.csv", level.alpha));
                write_series_csv(&path, &traj, level.alpha, cfg.series_stride)?;
                let eps = ErrorSeries::from_level(level, traj.dt).eps_final();
                let loc = localized_error(&traj, level.alpha, r, cfg.criterion).unwrap_or(f64::NAN);
                println!("alpha {:<8} eps(T) {:.6e} localized error {:.6e} -> {}", level.alpha, eps, loc, path.display());
            }
            Ok(true)
        }
        Command::ConvergenceStudy => {
            ensure_dir(&cfg.out_dir)?;
            let report = run_study(&cfg, &dumps(&cfg, cli.common.dump_series)?)?;
            fs::write(cfg.out_dir.join("results.csv"), results_csv(&report.ensemble, report.fit.as_ref()))?;
            fs::write(cfg.out_dir.join("plot.dat"), plot_data(&report.ensemble))?;
            print_report(&report);
            println!("wrote {}", cfg.out_dir.join("results.csv").display());
            Ok(true)
        }
        Command::TailStudy => {
            ensure_dir(&cfg.out_dir)?;
            let report = run_study(&cfg, &dumps(&cfg, cli.common.dump_series)?)?;
            let rows = tail_study(&report.ensemble, &cfg.tail_gamma);
            fs::write(cfg.out_dir.join("tail.csv"), tail_csv(&rows))?;
            print_report(&report);
            for r in &rows {
                println!(
                    "n {} alpha {} threshold {:.4e}: {}/{} = {:.4} (Wilson {:.4} .. {:.4})",
                    r.n, r.alpha, r.threshold, r.exceed, r.samples, r.freq, r.wilson_low, r.wilson_high
                );
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("leray-lab: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Validation(_) => 2,
                Error::BlowUp { .. } => 3,
                _ => 1,
            })
        }
    }
}
