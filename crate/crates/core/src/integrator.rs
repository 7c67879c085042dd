//! Coupled time stepping of the Galerkin stochastic Navier-Stokes system and
//! the Galerkin stochastic Leray-alpha system on one noise path.
//!
//! Both systems use the linearly implicit Euler-Maruyama update
//!
//! ```text
//! ŵ⁺_k = [ŵ_k - Δt B̂(a, w)_k + (Q(a) ΔW)_k] / (1 + ν Δt λ_k)
//! ```
//!
//! with `(a, w) = (u, u)` for Navier-Stokes and `(a, w) = (u^α, v^α)`,
//! `u^α = N_α v^α`, for Leray-alpha.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::{energy_monitors, EnergyMonitors};
use crate::noise::{apply_q, sample_increment, NoiseIncrement, NoiseModel, NoiseStream};
use crate::nonlinear::{advect, physical_packed};
use crate::spectral::{
    apply_helmholtz_filter, check_same_grid, invert_helmholtz, norm, weighted_energy, Grid,
    NormKind, PhysicalVelocity, SpectralField, SpectralVelocity, C64,
};

#[derive(Clone, Debug)]
pub struct SimParams {
    pub nu: f64,
    /// Filter widths, one Leray-alpha system each. `0` is accepted as a
    /// reference sentinel that reproduces the Navier-Stokes dynamics.
    pub alphas: Vec<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub grid: Arc<Grid>,
    pub noise: NoiseModel,
    pub u0: SpectralVelocity,
    /// Test hook: drop the bilinear term from both systems.
    pub advection: bool,
}

impl SimParams {
    pub fn new(
        nu: f64,
        alphas: Vec<f64>,
        dt: f64,
        horizon: f64,
        noise: NoiseModel,
        u0: SpectralVelocity,
    ) -> Result<Self> {
        let params = SimParams {
            nu,
            alphas,
            dt,
            horizon,
            grid: Arc::clone(u0.grid()),
            noise,
            u0,
            advection: true,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::Validation(format!("viscosity must be positive, got {}", self.nu)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Validation(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Validation(format!("horizon must be positive, got {}", self.horizon)));
        }
        let ratio = self.horizon / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Validation(format!(
                "horizon {} is not a whole number of steps of {}",
                self.horizon, self.dt
            )));
        }
        for &a in &self.alphas {
            if !(0.0..1.0).contains(&a) {
                return Err(Error::Validation(format!("alpha must lie in (0, 1), got {a}")));
            }
        }
        check_same_grid(&self.grid, self.u0.grid())?;
        check_same_grid(&self.grid, self.noise.grid())?;
        if !self.u0.is_finite() || !norm(&self.u0, NormKind::DA).is_finite() {
            return Err(Error::Validation("initial condition has infinite |A u0|".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Band-limited random divergence-free field with `||u0|| = |A^{1/2} u0| = 1`.
///
/// Modes with `1 <= |k| <= band` (Euclidean) get complex Gaussian amplitudes
/// scaled by `1/lambda`.
pub fn random_initial_condition(grid: &Arc<Grid>, seed: u64, band: f64) -> Result<SpectralVelocity> {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[16..24].copy_from_slice(b"initial0");
    let mut rng = ChaCha8Rng::from_seed(key);
    let u = SpectralVelocity::random(grid, &mut rng, band.ceil() as usize, 2.0);
    let base = grid.lambda1();
    let banded = u.scale_modes(|lambda| if lambda <= band * band * base * (1.0 + 1e-12) { 1.0 } else { 0.0 });
    let v = norm(&banded, NormKind::V);
    if v == 0.0 {
        return Err(Error::Validation(format!("band {band} contains no retained modes")));
    }
    Ok(banded.scaled(1.0 / v))
}

fn implicit_update(
    state: &SpectralVelocity,
    advection: Option<&SpectralVelocity>,
    forcing: &SpectralVelocity,
    params: &SimParams,
    step: u64,
) -> Result<SpectralVelocity> {
    let grid = state.grid();
    let mut out = SpectralField::zeros(grid);
    let zero = C64::new(0.0, 0.0);
    for idx in grid.retained_indices() {
        let denom = 1.0 + params.nu * params.dt * grid.lambda(idx);
        let (bx, by) = advection.map_or((zero, zero), |b| (b.x()[idx], b.y()[idx]));
        out.x[idx] = (state.x()[idx] - bx * params.dt + forcing.x()[idx]) / denom;
        out.y[idx] = (state.y()[idx] - by * params.dt + forcing.y()[idx]) / denom;
    }
    let out = SpectralVelocity::from_field_unchecked(out);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::BlowUp {
            step: step as usize,
            sample: None,
            alpha: None,
        })
    }
}

/// One Navier-Stokes step given `u` in packed physical form.
fn nse_update(
    u: &SpectralVelocity,
    u_phys: &[C64],
    dw: &NoiseIncrement,
    params: &SimParams,
) -> Result<SpectralVelocity> {
    let b = params.advection.then(|| advect(u_phys, u));
    let forcing = apply_q(u, dw, &params.noise)?;
    implicit_update(u, b.as_ref(), &forcing, params, dw.step)
}

/// One Leray-alpha step given the filtered velocity and its physical samples.
fn leray_update(
    v: &SpectralVelocity,
    u: &SpectralVelocity,
    u_phys: &[C64],
    dw: &NoiseIncrement,
    alpha: f64,
    params: &SimParams,
) -> Result<(SpectralVelocity, SpectralVelocity)> {
    let b = params.advection.then(|| advect(u_phys, v));
    let forcing = apply_q(u, dw, &params.noise)?;
    let v_next = implicit_update(v, b.as_ref(), &forcing, params, dw.step)?;
    let u_next = apply_helmholtz_filter(&v_next, alpha);
    Ok((v_next, u_next))
}

pub fn step_nse(u: &SpectralVelocity, dw: &NoiseIncrement, params: &SimParams) -> Result<SpectralVelocity> {
    check_same_grid(u.grid(), &params.grid)?;
    nse_update(u, &physical_packed(u), dw, params)
}

/// Advance `v^α` one step; returns `(v⁺, u⁺ = N_α v⁺)`.
pub fn step_leray(
    v: &SpectralVelocity,
    dw: &NoiseIncrement,
    alpha: f64,
    params: &SimParams,
) -> Result<(SpectralVelocity, SpectralVelocity)> {
    check_same_grid(v.grid(), &params.grid)?;
    let u = apply_helmholtz_filter(v, alpha);
    leray_update(v, &u, &physical_packed(&u), dw, alpha, params)
}

/// Per-grid-time diagnostics of one Leray-alpha level.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LevelSeries {
    pub alpha: f64,
    /// `|u - u^α|`.
    pub delta_h: Vec<f64>,
    /// `|A^{1/2}(u - u^α)|^2`.
    pub delta_v2: Vec<f64>,
    /// `||u^α||^2`.
    pub v2: Vec<f64>,
    /// `||u^α||_{L^4}^4`.
    pub l4_4: Vec<f64>,
    pub monitors: Vec<EnergyMonitors>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NseSeries {
    /// `|u|^2`.
    pub h2: Vec<f64>,
    /// `||u||^2`.
    pub v2: Vec<f64>,
}

/// Scalar time series of one coupled run, sampled at `t_m = m Δt`,
/// `m = 0..=steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledTrajectory {
    pub sample: u64,
    pub dt: f64,
    pub steps: usize,
    pub nse: NseSeries,
    pub levels: Vec<LevelSeries>,
}

impl CoupledTrajectory {
    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn level(&self, alpha: f64) -> Option<&LevelSeries> {
        self.levels.iter().find(|l| l.alpha == alpha)
    }
}

/// Full coupled state at one grid time, handed to observers.
pub struct CoupledState<'a> {
    pub step: usize,
    pub t: f64,
    pub u_ref: &'a SpectralVelocity,
    pub v_alpha: &'a [SpectralVelocity],
    pub u_alpha: &'a [SpectralVelocity],
}

pub fn run_coupled(params: &SimParams, stream: NoiseStream) -> Result<CoupledTrajectory> {
    run_coupled_observed(params, stream, |_| Ok(()))
}

/// [`run_coupled`] with a callback invoked at every grid time before the
/// step from that time is taken (and once at the horizon).
pub fn run_coupled_observed<F>(params: &SimParams, stream: NoiseStream, mut observe: F) -> Result<CoupledTrajectory>
where
    F: FnMut(&CoupledState<'_>) -> Result<()>,
{
    params.validate()?;
    let steps = params.steps();
    let context = |e: Error, alpha: Option<f64>| e.with_context(Some(stream.sample_id()), alpha);

    let mut u = params.u0.clone();
    let mut vs: Vec<SpectralVelocity> = params.alphas.iter().map(|&a| invert_helmholtz(&u, a)).collect();
    let mut us: Vec<SpectralVelocity> = vec![u.clone(); params.alphas.len()];

    let mut nse = NseSeries::default();
    let mut levels: Vec<LevelSeries> = params
        .alphas
        .iter()
        .map(|&alpha| LevelSeries {
            alpha,
            ..LevelSeries::default()
        })
        .collect();

    for m in 0..=steps {
        observe(&CoupledState {
            step: m,
            t: m as f64 * params.dt,
            u_ref: &u,
            v_alpha: &vs,
            u_alpha: &us,
        })?;

        nse.h2.push(weighted_energy(&u, 0));
        nse.v2.push(weighted_energy(&u, 1));
        let dw = (m < steps).then(|| sample_increment(&stream, m as u64, params.dt, &params.noise));

        let mut u_phys_by_level = Vec::with_capacity(levels.len());
        for (k, level) in levels.iter_mut().enumerate() {
            let delta = &u - &us[k];
            level.delta_h.push(weighted_energy(&delta, 0).sqrt());
            level.delta_v2.push(weighted_energy(&delta, 1));
            level.v2.push(weighted_energy(&us[k], 1));
            let phys = physical_packed(&us[k]);
            level.l4_4.push(l4_pow4_packed(&phys, params.grid.length()));
            level.monitors.push(energy_monitors(&us[k], level.alpha));
            u_phys_by_level.push(phys);
        }

        let Some(dw) = dw else { break };
        let u_next = nse_update(&u, &physical_packed(&u), &dw, params).map_err(|e| context(e, None))?;
        for (k, phys) in u_phys_by_level.iter().enumerate() {
            let alpha = params.alphas[k];
            let (v_next, uu_next) =
                leray_update(&vs[k], &us[k], phys, &dw, alpha, params).map_err(|e| context(e, Some(alpha)))?;
            vs[k] = v_next;
            us[k] = uu_next;
        }
        u = u_next;
    }

    Ok(CoupledTrajectory {
        sample: stream.sample_id(),
        dt: params.dt,
        steps,
        nse,
        levels,
    })
}

fn l4_pow4_packed(phys: &[C64], length: f64) -> f64 {
    let n2 = phys.len() as f64;
    let cell = length * length / n2;
    cell * phys
        .iter()
        .map(|z| {
            let s = z.norm_sqr();
            s * s
        })
        .sum::<f64>()
}

/// Physical samples of a packed field, for callers needing `PhysicalVelocity`.
pub fn unpack(phys: &[C64], grid: &Grid) -> PhysicalVelocity {
    PhysicalVelocity {
        x: phys.iter().map(|z| z.re).collect(),
        y: phys.iter().map(|z| z.im).collect(),
        n: grid.n(),
        length: grid.length(),
    }
}
