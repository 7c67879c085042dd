//! Fourier representation of divergence-free periodic velocity fields on
//! `[0, L]^2` and the diagonal operators acting on them.
//!
//! Coefficients follow the Fourier-series convention
//! `u(x) = sum_k û_k exp(2πi k·x / L)`, so that `|u|^2 = L^2 sum_k |û_k|^2`.
//! Arrays are stored in FFT order, row-major with the row index running
//! along `y`: position `j * N + i` holds mode `(k(i), k(j))` where
//! `k(i) = i` for `i < N/2` and `i - N` otherwise.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Sub};
use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Grid configuration: period, resolution and truncation rules.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub length: f64,
    pub n: usize,
    pub dealias_fraction: f64,
    /// Largest retained `|k|_inf`. Defaults to the dealiasing cutoff.
    pub galerkin_cutoff: Option<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            length: 2.0 * PI,
            n: 64,
            dealias_fraction: 2.0 / 3.0,
            galerkin_cutoff: None,
        }
    }
}

impl GridSpec {
    pub fn new(length: f64, n: usize) -> Self {
        GridSpec {
            length,
            n,
            ..GridSpec::default()
        }
    }

    /// Largest `|k|_inf` that survives the dealiasing mask.
    pub fn dealias_cutoff(&self) -> usize {
        // the epsilon absorbs 2/3 * N/2 landing just below an integer
        (self.dealias_fraction * self.n as f64 / 2.0 + 1e-9).floor() as usize
    }

    pub fn retained_cutoff(&self) -> usize {
        self.galerkin_cutoff.unwrap_or_else(|| self.dealias_cutoff())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::Validation(format!(
                "period length must be positive, got {}",
                self.length
            )));
        }
        if self.n < 8 || !self.n.is_multiple_of(2) {
            return Err(Error::Validation(format!(
                "resolution must be even and at least 8, got {}",
                self.n
            )));
        }
        if !(self.dealias_fraction > 0.0 && self.dealias_fraction <= 1.0) {
            return Err(Error::Validation(format!(
                "dealias fraction must lie in (0, 1], got {}",
                self.dealias_fraction
            )));
        }
        let dealias = self.dealias_cutoff();
        if dealias < 2 {
            return Err(Error::Validation(format!(
                "dealiasing keeps only {dealias} modes per axis, need at least 2"
            )));
        }
        // the Nyquist mode has no conjugate partner
        if dealias >= self.n / 2 {
            return Err(Error::Validation(
                "dealias fraction 1 would retain the Nyquist mode".into(),
            ));
        }
        if let Some(cut) = self.galerkin_cutoff {
            if cut == 0 || cut > dealias {
                return Err(Error::Validation(format!(
                    "galerkin cutoff {cut} must lie in 1..={dealias}"
                )));
            }
        }
        Ok(())
    }
}

/// A lattice mode with its Stokes eigenvalue `(2π/L)^2 |k|^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveVector {
    pub kx: i64,
    pub ky: i64,
    pub lambda: f64,
}

impl WaveVector {
    pub fn sup_norm(&self) -> usize {
        self.kx.unsigned_abs().max(self.ky.unsigned_abs()) as usize
    }

    /// Unit vector `k⊥/|k| = (-ky, kx)/|k|`, the polarization of the
    /// divergence-free eigenmodes at this wave vector.
    pub fn polarization(&self) -> (f64, f64) {
        let norm = ((self.kx * self.kx + self.ky * self.ky) as f64).sqrt();
        (-(self.ky as f64) / norm, self.kx as f64 / norm)
    }

    /// True for the canonical member of each `{k, -k}` pair.
    pub fn is_upper_half(&self) -> bool {
        self.kx > 0 || (self.kx == 0 && self.ky > 0)
    }
}

/// Precomputed lattice data and FFT plans for one [`GridSpec`].
pub struct Grid {
    spec: GridSpec,
    cutoff: usize,
    dealias_cutoff: usize,
    signed: Vec<i64>,
    wavenumber: Vec<f64>,
    lambda: Vec<f64>,
    retained: Vec<bool>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("spec", &self.spec)
            .field("cutoff", &self.cutoff)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Arc<Grid>> {
        spec.validate()?;
        let n = spec.n;
        let cutoff = spec.retained_cutoff();
        let dealias_cutoff = spec.dealias_cutoff();
        let signed: Vec<i64> = (0..n)
            .map(|i| if i < n / 2 { i as i64 } else { i as i64 - n as i64 })
            .collect();
        let base = 2.0 * PI / spec.length;
        let wavenumber = signed.iter().map(|&k| base * k as f64).collect();
        let mut lambda = vec![0.0; n * n];
        let mut retained = vec![false; n * n];
        for j in 0..n {
            for i in 0..n {
                let (kx, ky) = (signed[i], signed[j]);
                lambda[j * n + i] = base * base * (kx * kx + ky * ky) as f64;
                let sup = kx.unsigned_abs().max(ky.unsigned_abs()) as usize;
                retained[j * n + i] = sup <= cutoff && (kx, ky) != (0, 0);
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Grid {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            spec,
            cutoff,
            dealias_cutoff,
            signed,
            wavenumber,
            lambda,
            retained,
        }))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn length(&self) -> f64 {
        self.spec.length
    }

    /// Number of coefficients per velocity component.
    pub fn len(&self) -> usize {
        self.spec.n * self.spec.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dealias_cutoff(&self) -> usize {
        self.dealias_cutoff
    }

    /// Smallest Stokes eigenvalue `(2π/L)^2`.
    pub fn lambda1(&self) -> f64 {
        let base = 2.0 * PI / self.spec.length;
        base * base
    }

    pub fn index(&self, kx: i64, ky: i64) -> Option<usize> {
        let n = self.spec.n as i64;
        if kx.abs() >= n / 2 || ky.abs() >= n / 2 {
            return None;
        }
        let i = kx.rem_euclid(n) as usize;
        let j = ky.rem_euclid(n) as usize;
        Some(j * self.spec.n + i)
    }

    /// Flat position of `-k`.
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let n = self.spec.n;
        let (i, j) = (idx % n, idx / n);
        ((n - j) % n) * n + (n - i) % n
    }

    pub fn wave_vector(&self, idx: usize) -> WaveVector {
        let n = self.spec.n;
        WaveVector {
            kx: self.signed[idx % n],
            ky: self.signed[idx / n],
            lambda: self.lambda[idx],
        }
    }

    /// Physical wavenumbers `(2π/L) k` at a flat position.
    pub fn wavenumbers(&self, idx: usize) -> (f64, f64) {
        let n = self.spec.n;
        (self.wavenumber[idx % n], self.wavenumber[idx / n])
    }

    pub fn lambda(&self, idx: usize) -> f64 {
        self.lambda[idx]
    }

    pub fn is_retained(&self, idx: usize) -> bool {
        self.retained[idx]
    }

    pub fn retained_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.retained
            .iter()
            .enumerate()
            .filter_map(|(i, &r)| r.then_some(i))
    }

    /// Retained positions with `k` in the upper half plane.
    pub fn half_plane_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.retained_indices()
            .filter(move |&i| self.wave_vector(i).is_upper_half())
    }

    /// In-place unnormalized 2-D transform (`sign = -1` forward).
    pub(crate) fn fft2(&self, buf: &mut [C64], forward: bool) {
        let n = self.spec.n;
        debug_assert_eq!(buf.len(), n * n);
        let plan = if forward { &self.forward } else { &self.inverse };
        plan.process(buf);
        transpose_in_place(buf, n);
        plan.process(buf);
        transpose_in_place(buf, n);
    }
}

fn transpose_in_place(buf: &mut [C64], n: usize) {
    for j in 0..n {
        for i in (j + 1)..n {
            buf.swap(j * n + i, i * n + j);
        }
    }
}

/// Unconstrained spectral vector field (two complex component arrays).
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Arc<Grid>,
    pub x: Vec<C64>,
    pub y: Vec<C64>,
}

impl SpectralField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        SpectralField {
            grid: Arc::clone(grid),
            x: vec![C64::new(0.0, 0.0); grid.len()],
            y: vec![C64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Set mode `k` and its conjugate partner so the field stays real.
    pub fn set_mode(&mut self, kx: i64, ky: i64, cx: C64, cy: C64) -> Result<()> {
        let idx = self
            .grid
            .index(kx, ky)
            .ok_or_else(|| Error::Config(format!("mode ({kx}, {ky}) not on the grid")))?;
        let conj = self.grid.conjugate_index(idx);
        self.x[idx] = cx;
        self.y[idx] = cy;
        self.x[conj] = cx.conj();
        self.y[conj] = cy.conj();
        Ok(())
    }

    /// Largest deviation from `f(-k) = conj(f(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| {
                let c = self.grid.conjugate_index(i);
                (self.x[i] - self.x[c].conj())
                    .norm()
                    .max((self.y[i] - self.y[c].conj()).norm())
            })
            .fold(0.0, f64::max)
    }
}

/// Divergence-free, zero-mean, real velocity field supported on the
/// retained lattice. Only constructible through [`project_leray`] or
/// operations that preserve these properties.
#[derive(Clone, Debug)]
pub struct SpectralVelocity(SpectralField);

impl SpectralVelocity {
    pub fn zero(grid: &Arc<Grid>) -> Self {
        SpectralVelocity(SpectralField::zeros(grid))
    }

    /// The real orthonormal Stokes eigenfunction
    /// `(√2/L) (k⊥/|k|) cos(2π k·x/L + phase)`.
    pub fn eigenmode(grid: &Arc<Grid>, kx: i64, ky: i64, phase: f64) -> Result<Self> {
        let idx = grid
            .index(kx, ky)
            .filter(|&i| grid.is_retained(i))
            .ok_or_else(|| Error::Config(format!("mode ({kx}, {ky}) is not retained")))?;
        let (px, py) = grid.wave_vector(idx).polarization();
        let amp = C64::from_polar(1.0 / (2.0f64.sqrt() * grid.length()), phase);
        let mut raw = SpectralField::zeros(grid);
        raw.set_mode(kx, ky, amp * px, amp * py)?;
        Ok(SpectralVelocity(raw))
    }

    /// Random field with independent complex Gaussian amplitudes on every
    /// retained mode with `|k|_inf <= kmax`, scaled by `lambda^(-decay/2)`.
    pub fn random<R: Rng + ?Sized>(grid: &Arc<Grid>, rng: &mut R, kmax: usize, decay: f64) -> Self {
        let mut raw = SpectralField::zeros(grid);
        for idx in grid.half_plane_indices().collect::<Vec<_>>() {
            let wv = grid.wave_vector(idx);
            if wv.sup_norm() > kmax {
                continue;
            }
            let scale = wv.lambda.powf(-decay / 2.0);
            let mut draw = || {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                C64::new(re, im) * scale
            };
            let (cx, cy) = (draw(), draw());
            let conj = grid.conjugate_index(idx);
            raw.x[idx] = cx;
            raw.y[idx] = cy;
            raw.x[conj] = cx.conj();
            raw.y[conj] = cy.conj();
        }
        project_leray(&raw)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.0.grid
    }

    pub fn x(&self) -> &[C64] {
        &self.0.x
    }

    pub fn y(&self) -> &[C64] {
        &self.0.y
    }

    pub fn as_field(&self) -> &SpectralField {
        &self.0
    }

    pub fn into_field(self) -> SpectralField {
        self.0
    }

    /// Coefficient of `k` along the polarization `k⊥/|k|`.
    pub fn polar_amplitude(&self, idx: usize) -> C64 {
        let (px, py) = self.grid().wave_vector(idx).polarization();
        self.0.x[idx] * px + self.0.y[idx] * py
    }

    /// Multiply every retained mode by `factor(lambda)`.
    pub fn scale_modes(&self, factor: impl Fn(f64) -> f64) -> Self {
        let grid = self.grid();
        let mut out = self.0.clone();
        for idx in grid.retained_indices() {
            let m = factor(grid.lambda(idx));
            out.x[idx] *= m;
            out.y[idx] *= m;
        }
        SpectralVelocity(out)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.0.clone();
        out.x.iter_mut().chain(out.y.iter_mut()).for_each(|z| *z *= c);
        SpectralVelocity(out)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &SpectralVelocity) -> Self {
        check_same_grid(self.grid(), other.grid()).expect("fields live on different grids");
        let mut out = self.0.clone();
        for (a, b) in out.x.iter_mut().zip(&other.0.x) {
            *a += b * c;
        }
        for (a, b) in out.y.iter_mut().zip(&other.0.y) {
            *a += b * c;
        }
        SpectralVelocity(out)
    }

    pub fn is_finite(&self) -> bool {
        self.0
            .x
            .iter()
            .chain(&self.0.y)
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest `|k·û(k)| / |û(k)|` over nonzero modes.
    pub fn divergence_defect(&self) -> f64 {
        let grid = self.grid();
        (0..grid.len())
            .filter_map(|idx| {
                let (kx, ky) = grid.wavenumbers(idx);
                let mag = (self.0.x[idx].norm_sqr() + self.0.y[idx].norm_sqr()).sqrt();
                let k = (kx * kx + ky * ky).sqrt();
                (mag > 0.0 && k > 0.0).then(|| (self.0.x[idx] * kx + self.0.y[idx] * ky).norm() / (mag * k))
            })
            .fold(0.0, f64::max)
    }

    pub fn mean_mode(&self) -> (C64, C64) {
        (self.0.x[0], self.0.y[0])
    }

    /// Build from coefficients already known to satisfy the invariants.
    pub(crate) fn from_field_unchecked(field: SpectralField) -> Self {
        debug_assert!(field.x[0] == C64::new(0.0, 0.0) && field.y[0] == C64::new(0.0, 0.0));
        SpectralVelocity(field)
    }
}

impl Add for &SpectralVelocity {
    type Output = SpectralVelocity;
    fn add(self, rhs: &SpectralVelocity) -> SpectralVelocity {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SpectralVelocity {
    type Output = SpectralVelocity;
    fn sub(self, rhs: &SpectralVelocity) -> SpectralVelocity {
        self.axpy(-1.0, rhs)
    }
}

pub(crate) fn check_same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "grid mismatch: {:?} vs {:?}",
            a.spec(),
            b.spec()
        )))
    }
}

/// Leray projection: keep the component of each retained mode orthogonal
/// to `k` and zero everything else, including the mean.
pub fn project_leray(raw: &SpectralField) -> SpectralVelocity {
    let grid = Arc::clone(&raw.grid);
    let mut out = SpectralField::zeros(&grid);
    for idx in grid.retained_indices() {
        let (kx, ky) = grid.wavenumbers(idx);
        let k2 = kx * kx + ky * ky;
        let (ux, uy) = (raw.x[idx], raw.y[idx]);
        let kdotu = (ux * kx + uy * ky) / k2;
        out.x[idx] = ux - kdotu * kx;
        out.y[idx] = uy - kdotu * ky;
    }
    SpectralVelocity(out)
}

/// `A^s`: multiply mode `k` by `lambda(k)^s`.
pub fn apply_stokes_power(f: &SpectralVelocity, s: f64) -> SpectralVelocity {
    if s == 0.0 {
        return f.clone();
    }
    f.scale_modes(|lambda| lambda.powf(s))
}

/// `N_alpha = (I + alpha^2 A)^{-1}`.
pub fn apply_helmholtz_filter(f: &SpectralVelocity, alpha: f64) -> SpectralVelocity {
    assert!(alpha >= 0.0, "filter width must be non-negative");
    if alpha == 0.0 {
        return f.clone();
    }
    let a2 = alpha * alpha;
    f.scale_modes(|lambda| 1.0 / (1.0 + a2 * lambda))
}

/// `N_alpha^{-1} = I + alpha^2 A`.
pub fn invert_helmholtz(f: &SpectralVelocity, alpha: f64) -> SpectralVelocity {
    assert!(alpha >= 0.0, "filter width must be non-negative");
    if alpha == 0.0 {
        return f.clone();
    }
    let a2 = alpha * alpha;
    f.scale_modes(|lambda| 1.0 + a2 * lambda)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    /// `|u|`, the L^2 norm.
    H,
    /// `||u|| = |A^{1/2} u|`.
    V,
    /// `|A u|`.
    DA,
    /// `(∫ |u|^4)^{1/4}` by grid quadrature.
    L4,
}

/// `L^2 sum_k lambda^p |û_k|^2`.
pub fn weighted_energy(f: &SpectralVelocity, power: i32) -> f64 {
    let grid = f.grid();
    let l2 = grid.length() * grid.length();
    let sum: f64 = grid
        .retained_indices()
        .map(|idx| {
            let w = if power == 0 { 1.0 } else { grid.lambda(idx).powi(power) };
            w * (f.x()[idx].norm_sqr() + f.y()[idx].norm_sqr())
        })
        .sum();
    l2 * sum
}

pub fn norm(f: &SpectralVelocity, kind: NormKind) -> f64 {
    match kind {
        NormKind::H => weighted_energy(f, 0).sqrt(),
        NormKind::V => weighted_energy(f, 1).sqrt(),
        NormKind::DA => weighted_energy(f, 2).sqrt(),
        NormKind::L4 => to_physical(f).l4_norm(),
    }
}

/// H inner product `∫ f·g`.
pub fn inner(f: &SpectralVelocity, g: &SpectralVelocity) -> f64 {
    inner_fields(f.as_field(), g.as_field())
}

pub(crate) fn inner_fields(f: &SpectralField, g: &SpectralField) -> f64 {
    let l = f.grid.length();
    let sum: f64 = f
        .x
        .iter()
        .zip(&g.x)
        .chain(f.y.iter().zip(&g.y))
        .map(|(a, b)| (a * b.conj()).re)
        .sum();
    l * l * sum
}

/// Velocity samples on the `N x N` collocation grid, row-major with the
/// row index along `y`.
#[derive(Clone, Debug)]
pub struct PhysicalVelocity {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub n: usize,
    pub length: f64,
}

impl PhysicalVelocity {
    /// `(∫ |u|^4 dx)^{1/4}` by the rectangle rule.
    pub fn l4_norm(&self) -> f64 {
        self.l4_norm_pow4().powf(0.25)
    }

    pub fn l4_norm_pow4(&self) -> f64 {
        let cell = (self.length / self.n as f64).powi(2);
        let sum: f64 = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(a, b)| {
                let s = a * a + b * b;
                s * s
            })
            .sum();
        cell * sum
    }

    pub fn l2_norm(&self) -> f64 {
        let cell = (self.length / self.n as f64).powi(2);
        let sum: f64 = self.x.iter().zip(&self.y).map(|(a, b)| a * a + b * b).sum();
        (cell * sum).sqrt()
    }
}

/// Inverse transform of a packed spectral pair: returns `fx + i fy` in
/// physical space (both fields real).
pub(crate) fn packed_to_physical(grid: &Grid, fx: &[C64], fy: &[C64]) -> Vec<C64> {
    let i = C64::new(0.0, 1.0);
    let mut buf: Vec<C64> = fx.iter().zip(fy).map(|(a, b)| a + i * b).collect();
    grid.fft2(&mut buf, false);
    buf
}

/// Forward transform of packed physical samples `gx + i gy`, returning the
/// unprojected spectral pair with exact Hermitian symmetry.
pub(crate) fn packed_to_spectral(grid: &Arc<Grid>, mut buf: Vec<C64>) -> SpectralField {
    grid.fft2(&mut buf, true);
    let scale = 1.0 / grid.len() as f64;
    let mut out = SpectralField::zeros(grid);
    let half_i = C64::new(0.0, -0.5);
    for idx in 0..grid.len() {
        let z = buf[idx];
        let zc = buf[grid.conjugate_index(idx)].conj();
        out.x[idx] = (z + zc) * (0.5 * scale);
        out.y[idx] = (z - zc) * half_i * scale;
    }
    out
}

pub fn to_physical(f: &SpectralVelocity) -> PhysicalVelocity {
    let grid = f.grid();
    let buf = packed_to_physical(grid, f.x(), f.y());
    PhysicalVelocity {
        x: buf.iter().map(|z| z.re).collect(),
        y: buf.iter().map(|z| z.im).collect(),
        n: grid.n(),
        length: grid.length(),
    }
}

/// Forward transform followed by truncation to the retained lattice and
/// Leray projection.
pub fn to_spectral(p: &PhysicalVelocity, grid: &Arc<Grid>) -> Result<SpectralVelocity> {
    if p.n != grid.n() || p.x.len() != grid.len() || p.y.len() != grid.len() {
        return Err(Error::Config(format!(
            "physical field has {} x {} samples, grid expects {} x {}",
            p.n,
            p.n,
            grid.n(),
            grid.n()
        )));
    }
    if (p.length - grid.length()).abs() > 1e-12 * grid.length() {
        return Err(Error::Config(format!(
            "physical field period {} differs from grid period {}",
            p.length,
            grid.length()
        )));
    }
    let buf = p.x.iter().zip(&p.y).map(|(&a, &b)| C64::new(a, b)).collect();
    Ok(project_leray(&packed_to_spectral(grid, buf)))
}
