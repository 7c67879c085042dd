//! Error functional, stopping times and a-priori energy monitors.
//!
//! All time integrals use left-endpoint sums on the uniform grid
//! `t_m = m Δt`: the integral up to `t_m` is `Σ_{j<m} Δt f(t_j)`.

use crate::integrator::{CoupledTrajectory, LevelSeries};
use crate::spectral::{invert_helmholtz, weighted_energy, SpectralVelocity};

/// Running parts of `ε_α(t) = sup_{s≤t} |δ(s)| + (∫_0^t |A^{1/2} δ|² ds)^{1/2}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorSeries {
    pub dt: f64,
    pub sup_part: Vec<f64>,
    pub int_part: Vec<f64>,
    pending: f64,
}

impl ErrorSeries {
    pub fn new(dt: f64) -> Self {
        ErrorSeries {
            dt,
            ..Default::default()
        }
    }

    /// Rebuild from sampled `|δ(t_m)|` and `|A^{1/2}δ(t_m)|²`.
    pub fn from_samples(delta_h: &[f64], delta_v2: &[f64], dt: f64) -> Self {
        let mut s = ErrorSeries::new(dt);
        for (&h, &v2) in delta_h.iter().zip(delta_v2) {
            s.push(h, v2);
        }
        s
    }

    pub fn from_level(level: &LevelSeries, dt: f64) -> Self {
        Self::from_samples(&level.delta_h, &level.delta_v2, dt)
    }

    /// Append the gap at the next grid time.
    pub fn push(&mut self, delta_h: f64, delta_v2: f64) {
        let sup = self.sup_part.last().map_or(delta_h, |&s| s.max(delta_h));
        let int = self.int_part.last().map_or(0.0, |&i| i + self.dt * self.pending);
        self.sup_part.push(sup);
        self.int_part.push(int);
        self.pending = delta_v2;
    }

    pub fn len(&self) -> usize {
        self.sup_part.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sup_part.is_empty()
    }

    pub fn eps(&self, m: usize) -> f64 {
        self.sup_part[m] + self.int_part[m].sqrt()
    }

    pub fn eps_final(&self) -> f64 {
        self.len().checked_sub(1).map_or(0.0, |m| self.eps(m))
    }
}

pub fn update_error(series: &mut ErrorSeries, u: &SpectralVelocity, u_alpha: &SpectralVelocity) {
    let delta = u - u_alpha;
    series.push(weighted_energy(&delta, 0).sqrt(), weighted_energy(&delta, 1));
}

/// `ε` restricted to the grid window `[t_from, t_to]`.
pub fn error_on_window(delta_h: &[f64], delta_v2: &[f64], dt: f64, from: usize, to: usize) -> f64 {
    let sup = delta_h[from..=to].iter().fold(0.0f64, |a, &b| a.max(b));
    let int: f64 = delta_v2[from..to].iter().map(|v| dt * v).sum();
    sup + int.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Criterion {
    /// `∫ ||u^α||² ds`.
    V2,
    /// `∫ ||u^α||_{L^4}^4 ds`.
    #[default]
    L4,
}

impl std::str::FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "v2" | "v" => Ok(Criterion::V2),
            "l4" => Ok(Criterion::L4),
            other => Err(format!("unknown localization criterion '{other}'")),
        }
    }
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Criterion::V2 => "v2",
            Criterion::L4 => "l4",
        })
    }
}

/// Running localization integrals of one level.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalizationState {
    pub dt: f64,
    pub iv: Vec<f64>,
    pub i4: Vec<f64>,
}

fn running_integral(f: &[f64], dt: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(f.len());
    for j in 0..f.len() {
        if j > 0 {
            acc += dt * f[j - 1];
        }
        out.push(acc);
    }
    out
}

impl LocalizationState {
    pub fn from_samples(v2: &[f64], l4_4: &[f64], dt: f64) -> Self {
        LocalizationState {
            dt,
            iv: running_integral(v2, dt),
            i4: running_integral(l4_4, dt),
        }
    }

    pub fn from_level(level: &LevelSeries, dt: f64) -> Self {
        Self::from_samples(&level.v2, &level.l4_4, dt)
    }

    pub fn integral(&self, criterion: Criterion) -> &[f64] {
        match criterion {
            Criterion::V2 => &self.iv,
            Criterion::L4 => &self.i4,
        }
    }

    /// Integral over the whole horizon.
    pub fn total(&self, criterion: Criterion) -> f64 {
        self.integral(criterion).last().copied().unwrap_or(0.0)
    }

    pub fn steps(&self) -> usize {
        self.iv.len().saturating_sub(1)
    }

    /// Index of the first grid time with integral `>= r`, else the final index.
    pub fn stopping_index(&self, r: f64, criterion: Criterion) -> usize {
        let ints = self.integral(criterion);
        ints.iter().position(|&i| i >= r).unwrap_or(self.steps())
    }

    pub fn stopping_time(&self, r: f64, criterion: Criterion) -> f64 {
        self.stopping_index(r, criterion) as f64 * self.dt
    }

    /// Whether the integral over the horizon stays at or below `r`.
    pub fn omega(&self, r: f64, criterion: Criterion) -> bool {
        self.total(criterion) <= r
    }

    /// Whether `τ_R` equals the horizon.
    pub fn reaches_horizon(&self, r: f64, criterion: Criterion) -> bool {
        self.stopping_index(r, criterion) == self.steps()
    }
}

/// `sup_{t_j ≤ τ} |δ|² + 4 Σ_{t_j < τ} Δt |A^{1/2}δ(t_j)|²` with `τ = τ_R ∧ T`.
pub fn localized_error_series(
    delta_h: &[f64],
    delta_v2: &[f64],
    loc: &LocalizationState,
    r: f64,
    criterion: Criterion,
) -> f64 {
    let stop = loc.stopping_index(r, criterion);
    let sup = delta_h[..=stop].iter().fold(0.0f64, |a, &b| a.max(b));
    let int: f64 = delta_v2[..stop].iter().map(|v| loc.dt * v).sum();
    sup * sup + 4.0 * int
}

pub fn localized_error(traj: &CoupledTrajectory, alpha: f64, r: f64, criterion: Criterion) -> Option<f64> {
    let level = traj.level(alpha)?;
    let loc = LocalizationState::from_level(level, traj.dt);
    Some(localized_error_series(&level.delta_h, &level.delta_v2, &loc, r, criterion))
}

pub fn stopping_time(traj: &CoupledTrajectory, alpha: f64, r: f64, criterion: Criterion) -> Option<f64> {
    let level = traj.level(alpha)?;
    Some(LocalizationState::from_level(level, traj.dt).stopping_time(r, criterion))
}

/// Energy functionals of the filtered velocity at one time.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyMonitors {
    /// `|u|² + 2α²|A^{1/2}u|² + α⁴|Au|²`.
    pub m1: f64,
    /// `|A^{1/2}u|² + α²|Au|²`.
    pub y: f64,
    /// `|Au|² + α²|A^{3/2}u|²`.
    pub dissipation: f64,
}

pub fn energy_monitors(u_alpha: &SpectralVelocity, alpha: f64) -> EnergyMonitors {
    let a2 = alpha * alpha;
    let e: [f64; 4] = std::array::from_fn(|p| weighted_energy(u_alpha, p as i32));
    EnergyMonitors {
        m1: e[0] + 2.0 * a2 * e[1] + a2 * a2 * e[2],
        y: e[1] + a2 * e[2],
        dissipation: e[2] + a2 * e[3],
    }
}

/// `|v^α|²` computed directly from `v^α = (I + α²A) u^α`.
pub fn momentum_energy(u_alpha: &SpectralVelocity, alpha: f64) -> f64 {
    weighted_energy(&invert_helmholtz(u_alpha, alpha), 0)
}
