//! Study configuration and the flat `key = value` config file.
//!
//! Lines are `key = value`; `#` starts a comment. Recognized keys:
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `length` | period `L` | `2π` |
//! | `n` | modes per axis | `64` |
//! | `dealias_fraction` | retained fraction of `N/2` | `2/3` |
//! | `galerkin_cutoff` | optional lower `|k|∞` cutoff | none |
//! | `nu` | viscosity | `0.05` |
//! | `dt` | time step | `1e-3` |
//! | `horizon` | final time `T` | `0.5` |
//! | `alphas` | comma-separated filter widths | `0.2,0.1,0.05,0.025` |
//! | `samples` | ensemble size `M` | `64` |
//! | `r` | localization threshold or `auto` | `auto` |
//! | `criterion` | `l4` or `v2` | `l4` |
//! | `seed` | master seed | `20240601` |
//! | `out` | output directory | `$LERAY_LAB_OUT` or `leray-lab-out` |
//! | `gamma`, `sigma_a`, `sigma_b`, `mult_cutoff`, `noise_cutoff` | noise | `2, 0.05, 0.05, 4, 8` |
//! | `u0_band` | largest `|k|` of the initial field | `4` |
//! | `tail_gamma` | `log`, `log:c` (`c(1+ln(1+n))`) or `const:c` | `log` |
//! | `pilot_samples` | pilot ensemble size for `r = auto` | `32` |
//! | `r_headroom` | factor applied to the pilot quantile | `1.5` |
//! | `threads` | `0` = all cores, `1` = serial | `0` |
//! | `exploratory` | drop blown-up samples instead of aborting | `false` |
//! | `series_stride` | decimation of dumped time series | `1` |
//! | `snapshot_stride` | write binary snapshots every k steps, `0` = off | `0` |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::estimators::Criterion;
use crate::integrator::{random_initial_condition, SimParams};
use crate::noise::{make_noise_model, NoiseConfig};
use crate::spectral::{Grid, GridSpec};

pub const OUT_DIR_ENV: &str = "LERAY_LAB_OUT";

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    Auto,
    Value(f64),
}

/// Sequence `Γ_n` for the probability study, `n = 1, 2, ...` along the α grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaSeq {
    /// `c (1 + ln(1 + n))`.
    Log(f64),
    Const(f64),
}

impl GammaSeq {
    pub fn value(&self, n: usize) -> f64 {
        match *self {
            GammaSeq::Log(c) => c * (1.0 + (1.0 + n as f64).ln()),
            GammaSeq::Const(c) => c,
        }
    }
}

impl Default for GammaSeq {
    fn default() -> Self {
        GammaSeq::Log(1.0)
    }
}

impl FromStr for GammaSeq {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid tail_gamma '{s}'"));
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim().parse::<f64>().map_err(|_| bad())?)),
            None => (s.trim(), None),
        };
        let c = arg.unwrap_or(1.0);
        if !c.is_finite() || c < 0.0 {
            return Err(bad());
        }
        match kind {
            "log" => Ok(GammaSeq::Log(c)),
            "const" if arg.is_some() => Ok(GammaSeq::Const(c)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for GammaSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaSeq::Log(c) => write!(f, "log:{c}"),
            GammaSeq::Const(c) => write!(f, "const:{c}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub grid: GridSpec,
    pub nu: f64,
    pub dt: f64,
    pub horizon: f64,
    pub alphas: Vec<f64>,
    pub samples: usize,
    pub threshold: Threshold,
    pub criterion: Criterion,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    pub noise: NoiseConfig,
    pub u0_band: f64,
    pub tail_gamma: GammaSeq,
    pub pilot_samples: usize,
    pub r_headroom: f64,
    pub threads: usize,
    pub exploratory: bool,
    pub series_stride: usize,
    pub snapshot_stride: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            grid: GridSpec::default(),
            nu: 0.05,
            dt: 1e-3,
            horizon: 0.5,
            alphas: vec![0.2, 0.1, 0.05, 0.025],
            samples: 64,
            threshold: Threshold::Auto,
            criterion: Criterion::L4,
            master_seed: 20240601,
            out_dir: default_out_dir(),
            noise: NoiseConfig::default(),
            u0_band: 4.0,
            tail_gamma: GammaSeq::default(),
            pilot_samples: 32,
            r_headroom: 1.5,
            threads: 0,
            exploratory: false,
            series_stride: 1,
            snapshot_stride: 0,
        }
    }
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("leray-lab-out"))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid value '{value}' for key '{key}'"))),
    }
}

impl StudyConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = StudyConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "length" => self.grid.length = parse(key, value)?,
            "n" => self.grid.n = parse(key, value)?,
            "dealias_fraction" => self.grid.dealias_fraction = parse(key, value)?,
            "galerkin_cutoff" => {
                self.grid.galerkin_cutoff = match value {
                    "none" | "" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "nu" => self.nu = parse(key, value)?,
            "dt" => self.dt = parse(key, value)?,
            "horizon" | "T" => self.horizon = parse(key, value)?,
            "alphas" => {
                self.alphas = value
                    .split(',')
                    .map(|a| parse(key, a.trim()))
                    .collect::<Result<_>>()?
            }
            "samples" => self.samples = parse(key, value)?,
            "r" | "R" => {
                self.threshold = match value {
                    "auto" => Threshold::Auto,
                    v => Threshold::Value(parse(key, v)?),
                }
            }
            "criterion" => self.criterion = value.parse().map_err(Error::Config)?,
            "seed" => self.master_seed = parse(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            "gamma" => self.noise.gamma = parse(key, value)?,
            "sigma_a" => self.noise.sigma_a = parse(key, value)?,
            "sigma_b" => self.noise.sigma_b = parse(key, value)?,
            "mult_cutoff" => self.noise.mult_cutoff = parse(key, value)?,
            "noise_cutoff" => self.noise.noise_cutoff = parse(key, value)?,
            "u0_band" => self.u0_band = parse(key, value)?,
            "tail_gamma" => self.tail_gamma = value.parse()?,
            "pilot_samples" => self.pilot_samples = parse(key, value)?,
            "r_headroom" => self.r_headroom = parse(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            "exploratory" => self.exploratory = parse_bool(key, value)?,
            "series_stride" => self.series_stride = parse(key, value)?,
            "snapshot_stride" => self.snapshot_stride = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Check ranges and put the α grid in decreasing order.
    pub fn validate(&mut self) -> Result<()> {
        self.grid.validate()?;
        if self.alphas.is_empty() {
            return Err(Error::Validation("alpha grid is empty".into()));
        }
        for &a in &self.alphas {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Validation(format!("alpha must lie in (0, 1), got {a}")));
            }
        }
        self.alphas.sort_by(|a, b| b.total_cmp(a));
        if self.alphas.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("alpha values must be distinct".into()));
        }
        if self.samples == 0 {
            return Err(Error::Validation("at least one sample is required".into()));
        }
        if let Threshold::Value(r) = self.threshold {
            if r.is_nan() || r < 0.0 {
                return Err(Error::Validation(format!("threshold must be non-negative, got {r}")));
            }
        }
        if !(self.r_headroom.is_finite() && self.r_headroom >= 1.0) {
            return Err(Error::Validation("r_headroom must be at least 1".into()));
        }
        if !(self.u0_band.is_finite() && self.u0_band >= 1.0) {
            return Err(Error::Validation("u0_band must be at least 1".into()));
        }
        if self.series_stride == 0 {
            return Err(Error::Validation("series_stride must be positive".into()));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>> {
        Grid::new(self.grid.clone())
    }

    /// Simulation parameters shared by every sample of the study.
    pub fn sim_params(&self) -> Result<SimParams> {
        let grid = self.build_grid()?;
        let noise = make_noise_model(&grid, &self.noise)?;
        let u0 = random_initial_condition(&grid, self.master_seed, self.u0_band)?;
        SimParams::new(self.nu, self.alphas.clone(), self.dt, self.horizon, noise, u0)
    }
}
