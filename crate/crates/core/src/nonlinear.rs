//! Dealiased pseudospectral evaluation of `B(u, v) = Π[(u·∇) v]`.

use crate::error::Result;
use crate::spectral::{
    check_same_grid, inner, packed_to_physical, packed_to_spectral, project_leray, Grid,
    SpectralVelocity, C64,
};

/// Modes that survive the 2/3-rule (or the configured fraction).
#[derive(Clone, Debug)]
pub struct DealiasMask {
    keep: Vec<bool>,
}

impl DealiasMask {
    pub fn new(grid: &Grid) -> Self {
        let cut = grid.dealias_cutoff();
        let keep = (0..grid.len())
            .map(|idx| grid.wave_vector(idx).sup_norm() <= cut)
            .collect();
        DealiasMask { keep }
    }

    pub fn keeps(&self, idx: usize) -> bool {
        self.keep[idx]
    }

    pub fn is_symmetric(&self, grid: &Grid) -> bool {
        (0..grid.len()).all(|i| self.keep[i] == self.keep[grid.conjugate_index(i)])
    }
}

/// `B(u, v)` given `u` already transformed to packed physical samples
/// `ux + i uy`.
pub(crate) fn advect(u_phys: &[C64], v: &SpectralVelocity) -> SpectralVelocity {
    let grid = v.grid();
    let i = C64::new(0.0, 1.0);
    let mut dx_x = vec![C64::new(0.0, 0.0); grid.len()];
    let mut dx_y = dx_x.clone();
    let mut dy_x = dx_x.clone();
    let mut dy_y = dx_x.clone();
    for idx in grid.retained_indices() {
        let (kx, ky) = grid.wavenumbers(idx);
        let (vx, vy) = (v.x()[idx], v.y()[idx]);
        dx_x[idx] = i * kx * vx;
        dx_y[idx] = i * kx * vy;
        dy_x[idx] = i * ky * vx;
        dy_y[idx] = i * ky * vy;
    }
    // packed: re = ∂v_x, im = ∂v_y
    let grad_x = packed_to_physical(grid, &dx_x, &dx_y);
    let grad_y = packed_to_physical(grid, &dy_x, &dy_y);
    let product: Vec<C64> = u_phys
        .iter()
        .zip(grad_x.iter().zip(&grad_y))
        .map(|(u, (gx, gy))| gx * u.re + gy * u.im)
        .collect();
    let mut raw = packed_to_spectral(grid, product);
    let mask = DealiasMask::new(grid);
    for idx in 0..grid.len() {
        if !mask.keeps(idx) {
            raw.x[idx] = C64::new(0.0, 0.0);
            raw.y[idx] = C64::new(0.0, 0.0);
        }
    }
    project_leray(&raw)
}

pub(crate) fn physical_packed(u: &SpectralVelocity) -> Vec<C64> {
    packed_to_physical(u.grid(), u.x(), u.y())
}

/// `B(u, v) = Π[(u·∇) v]`, gradients taken spectrally, product formed on
/// the collocation grid and dealiased before projection.
pub fn bilinear_b(u: &SpectralVelocity, v: &SpectralVelocity) -> Result<SpectralVelocity> {
    check_same_grid(u.grid(), v.grid())?;
    Ok(advect(&physical_packed(u), v))
}

/// `<B(u, v), w>`.
pub fn trilinear_form(
    u: &SpectralVelocity,
    v: &SpectralVelocity,
    w: &SpectralVelocity,
) -> Result<f64> {
    check_same_grid(u.grid(), w.grid())?;
    Ok(inner(&bilinear_b(u, v)?, w))
}
