//! Diagonal noise coefficient `Q` and truncated cylindrical Wiener increments.
//!
//! `Q` acts diagonally on the real Stokes eigenbasis
//! `ψ_k^re = (√2/L) p_k cos(2π k·x/L)`, `ψ_k^im = -(√2/L) p_k sin(2π k·x/L)`
//! (`p_k = k⊥/|k|`, `k` in the upper half plane):
//!
//! `Q(u) ψ_j = (a_j + b_j <u, ψ_j>) ψ_j`.
//!
//! Both Lipschitz constants equal `sup_j b_j` and the growth constants
//! follow from `(x + y)^2 <= 2x^2 + 2y^2`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::spectral::{check_same_grid, Grid, SpectralField, SpectralVelocity, C64};

/// Noise block of the experiment configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseConfig {
    /// Decay exponent of the additive amplitudes `a_k = sigma_a lambda_k^-gamma`.
    pub gamma: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    /// Multiplicative gains are `sigma_b` for `|k|_inf <= mult_cutoff`, else 0.
    pub mult_cutoff: usize,
    /// Largest driven `|k|_inf`.
    pub noise_cutoff: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            gamma: 2.0,
            sigma_a: 0.05,
            sigma_b: 0.05,
            mult_cutoff: 4,
            noise_cutoff: 8,
        }
    }
}

impl NoiseConfig {
    pub fn off() -> Self {
        NoiseConfig {
            sigma_a: 0.0,
            sigma_b: 0.0,
            ..NoiseConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Re,
    Im,
}

/// One real degree of freedom of the driving noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseMode {
    /// Flat grid position of `k` (upper half plane).
    pub index: usize,
    pub part: Part,
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Debug)]
pub struct NoiseModel {
    grid: Arc<Grid>,
    modes: Vec<NoiseMode>,
    lambdas: Vec<f64>,
    ell: [f64; 4],
    sum_a2: f64,
    sum_lambda_a2: f64,
}

impl NoiseModel {
    /// Build from an explicit list of driven degrees of freedom.
    pub fn from_modes(grid: &Arc<Grid>, modes: Vec<NoiseMode>) -> Result<Self> {
        for m in &modes {
            if m.index >= grid.len() || !grid.is_retained(m.index) {
                return Err(Error::Config(format!(
                    "noise mode at position {} is not a retained mode",
                    m.index
                )));
            }
            if !grid.wave_vector(m.index).is_upper_half() {
                return Err(Error::Config(format!(
                    "noise mode {:?} must be given in the upper half plane",
                    grid.wave_vector(m.index)
                )));
            }
            if !(m.a.is_finite() && m.b.is_finite() && m.a >= 0.0 && m.b >= 0.0) {
                return Err(Error::Validation(format!(
                    "noise coefficients must be finite and non-negative, got a = {}, b = {}",
                    m.a, m.b
                )));
            }
        }
        let lambdas: Vec<f64> = modes.iter().map(|m| grid.lambda(m.index)).collect();
        let sum_a2: f64 = modes.iter().map(|m| m.a * m.a).sum();
        let sum_lambda_a2: f64 = modes.iter().zip(&lambdas).map(|(m, l)| l * m.a * m.a).sum();
        let sup_b = modes.iter().map(|m| m.b).fold(0.0, f64::max);
        let ell2 = (2.0 * sum_a2 + 2.0 * sup_b * sup_b).sqrt();
        let ell3 = (2.0 * sum_lambda_a2 + 2.0 * sup_b * sup_b).sqrt();
        let ell = [sup_b, sup_b, ell2, ell3];
        if ell.iter().any(|l| !l.is_finite()) {
            return Err(Error::Validation("noise constants are not finite".into()));
        }
        Ok(NoiseModel {
            grid: Arc::clone(grid),
            modes,
            lambdas,
            ell,
            sum_a2,
            sum_lambda_a2,
        })
    }

    pub fn zero(grid: &Arc<Grid>) -> Self {
        NoiseModel::from_modes(grid, Vec::new()).expect("empty model is valid")
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn modes(&self) -> &[NoiseMode] {
        &self.modes
    }

    pub fn dofs(&self) -> usize {
        self.modes.len()
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|m| m.a == 0.0 && m.b == 0.0)
    }

    /// Lipschitz constant in H.
    pub fn ell0(&self) -> f64 {
        self.ell[0]
    }

    /// Lipschitz constant in `D(A^{1/2})`.
    pub fn ell1(&self) -> f64 {
        self.ell[1]
    }

    /// Linear growth constant in H.
    pub fn ell2(&self) -> f64 {
        self.ell[2]
    }

    /// Linear growth constant in `D(A^{1/2})`.
    pub fn ell3(&self) -> f64 {
        self.ell[3]
    }

    pub fn sum_a_squared(&self) -> f64 {
        self.sum_a2
    }

    pub fn sum_lambda_a_squared(&self) -> f64 {
        self.sum_lambda_a2
    }

    /// `<u, ψ_j>` for every driven degree of freedom.
    pub fn coordinates(&self, u: &SpectralVelocity) -> Vec<f64> {
        let scale = std::f64::consts::SQRT_2 * self.grid.length();
        self.modes
            .iter()
            .map(|m| {
                let c = u.polar_amplitude(m.index);
                scale
                    * match m.part {
                        Part::Re => c.re,
                        Part::Im => c.im,
                    }
            })
            .collect()
    }
}

pub fn make_noise_model(grid: &Arc<Grid>, config: &NoiseConfig) -> Result<NoiseModel> {
    if !(config.gamma > 1.0) {
        return Err(Error::Validation(format!(
            "gamma = {} <= 1: A^(1/2) Q is not Hilbert-Schmidt under refinement",
            config.gamma
        )));
    }
    if !(config.sigma_a >= 0.0 && config.sigma_b >= 0.0)
        || !config.sigma_a.is_finite()
        || !config.sigma_b.is_finite()
    {
        return Err(Error::Validation(format!(
            "noise amplitudes must be finite and non-negative, got sigma_a = {}, sigma_b = {}",
            config.sigma_a, config.sigma_b
        )));
    }
    if config.noise_cutoff == 0 || config.noise_cutoff > grid.cutoff() {
        return Err(Error::Validation(format!(
            "noise cutoff {} must lie in 1..={}",
            config.noise_cutoff,
            grid.cutoff()
        )));
    }
    let mut modes = Vec::new();
    for idx in grid.half_plane_indices() {
        let wv = grid.wave_vector(idx);
        if wv.sup_norm() > config.noise_cutoff {
            continue;
        }
        let a = config.sigma_a * wv.lambda.powf(-config.gamma);
        let b = if wv.sup_norm() <= config.mult_cutoff {
            config.sigma_b
        } else {
            0.0
        };
        for part in [Part::Re, Part::Im] {
            modes.push(NoiseMode {
                index: idx,
                part,
                a,
                b,
            });
        }
    }
    NoiseModel::from_modes(grid, modes)
}

/// Wiener increments over one step, one entry per driven real degree of freedom.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseIncrement {
    pub dw: Vec<f64>,
    pub dt: f64,
    /// Index of the time step this increment drives.
    pub step: u64,
}

/// Counter-based source of Wiener increments for one trajectory.
///
/// The ChaCha key is `(master_seed, sample)`, the stream id is the step
/// index and the word position follows the mode order, so any
/// `(sample, step, mode)` draw is reproducible in isolation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseStream {
    master_seed: u64,
    sample: u64,
}

impl NoiseStream {
    pub fn new(master_seed: u64, sample: u64) -> Self {
        NoiseStream {
            master_seed,
            sample,
        }
    }

    pub fn sample_id(&self) -> u64 {
        self.sample
    }

    /// Generator for a given stream index under this trajectory's key.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.sample.to_le_bytes());
        key[16..24].copy_from_slice(b"wiener-k");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream);
        rng
    }
}

pub fn sample_increment(stream: &NoiseStream, step: u64, dt: f64, model: &NoiseModel) -> NoiseIncrement {
    assert!(dt > 0.0, "step size must be positive");
    let mut rng = stream.rng(step);
    let sd = dt.sqrt();
    let dw = (0..model.dofs())
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    NoiseIncrement { dw, dt, step }
}

/// `Q(u) ΔW = sum_j (a_j + b_j <u, ψ_j>) ΔW_j ψ_j`.
pub fn apply_q(u: &SpectralVelocity, dw: &NoiseIncrement, model: &NoiseModel) -> Result<SpectralVelocity> {
    check_same_grid(u.grid(), model.grid())?;
    if dw.dw.len() != model.dofs() {
        return Err(Error::Config(format!(
            "increment has {} entries, noise model drives {} degrees of freedom",
            dw.dw.len(),
            model.dofs()
        )));
    }
    let grid = model.grid();
    let coords = model.coordinates(u);
    let inv = 1.0 / (std::f64::consts::SQRT_2 * grid.length());
    let mut amplitude = vec![C64::new(0.0, 0.0); grid.len()];
    for ((m, x), w) in model.modes.iter().zip(&coords).zip(&dw.dw) {
        let coeff = (m.a + m.b * x) * w * inv;
        amplitude[m.index] += match m.part {
            Part::Re => C64::new(coeff, 0.0),
            Part::Im => C64::new(0.0, coeff),
        };
    }
    let mut out = SpectralField::zeros(grid);
    for m in &model.modes {
        let idx = m.index;
        let (px, py) = grid.wave_vector(idx).polarization();
        let conj = grid.conjugate_index(idx);
        out.x[idx] = amplitude[idx] * px;
        out.y[idx] = amplitude[idx] * py;
        out.x[conj] = out.x[idx].conj();
        out.y[conj] = out.y[idx].conj();
    }
    Ok(SpectralVelocity::from_field_unchecked(out))
}

/// Squared Hilbert-Schmidt norms `(||Q||^2_{L2(K,H)}, ||A^{1/2} Q||^2_{L2(K,H)})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HsNorms {
    pub h_sq: f64,
    pub v_sq: f64,
}

impl HsNorms {
    pub fn h(&self) -> f64 {
        self.h_sq.sqrt()
    }

    pub fn v(&self) -> f64 {
        self.v_sq.sqrt()
    }
}

fn hs_sums(model: &NoiseModel, entry: impl Fn(usize, &NoiseMode) -> f64) -> HsNorms {
    let mut h_sq = 0.0;
    let mut v_sq = 0.0;
    for (j, (m, lambda)) in model.modes.iter().zip(&model.lambdas).enumerate() {
        let e = entry(j, m);
        h_sq += e * e;
        v_sq += lambda * e * e;
    }
    HsNorms { h_sq, v_sq }
}

pub fn hs_norms_q(u: &SpectralVelocity, model: &NoiseModel) -> HsNorms {
    let x = model.coordinates(u);
    hs_sums(model, |j, m| m.a + m.b * x[j])
}

/// Norms of the operator difference `Q(u1) - Q(u2)`.
pub fn hs_distance(u1: &SpectralVelocity, u2: &SpectralVelocity, model: &NoiseModel) -> HsNorms {
    let x1 = model.coordinates(u1);
    let x2 = model.coordinates(u2);
    hs_sums(model, |j, m| m.b * (x1[j] - x2[j]))
}

/// Norms of `N_alpha Q(u)`.
pub fn hs_norms_filtered(u: &SpectralVelocity, model: &NoiseModel, alpha: f64) -> HsNorms {
    let x = model.coordinates(u);
    let a2 = alpha * alpha;
    hs_sums(model, |j, m| {
        (m.a + m.b * x[j]) / (1.0 + a2 * model.lambdas[j])
    })
}
