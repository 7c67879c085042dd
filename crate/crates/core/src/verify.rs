//! Runtime invariant suite behind `leray-lab verify-operators`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::estimators::{energy_monitors, momentum_energy};
use crate::noise::{hs_distance, hs_norms_filtered, hs_norms_q, make_noise_model, NoiseConfig};
use crate::nonlinear::{bilinear_b, trilinear_form};
use crate::spectral::{
    apply_helmholtz_filter, apply_stokes_power, inner, invert_helmholtz, norm, project_leray, to_physical,
    to_spectral, Grid, GridSpec, NormKind, SpectralVelocity,
};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Largest observed violation measure; the check passes when it is `<= 0`.
    pub worst: f64,
    pub detail: String,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.worst <= 0.0
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

/// Tracks the worst ratio `observed / allowed` over a family of samples.
struct Worst {
    ratio: f64,
}

impl Worst {
    fn new() -> Self {
        Worst { ratio: 0.0 }
    }

    fn see(&mut self, observed: f64, allowed: f64) {
        let r = if allowed > 0.0 {
            observed / allowed
        } else if observed > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if !(r <= self.ratio) {
            self.ratio = r;
        }
    }

    fn check(self, name: &'static str, what: &str) -> Check {
        Check {
            name,
            worst: self.ratio - 1.0,
            detail: format!("{what}; worst observed/allowed = {:.3e}", self.ratio),
        }
    }
}

/// Run every operator invariant on `fields` random fields.
pub fn operator_suite(spec: &GridSpec, noise: &NoiseConfig, seed: u64, fields: usize) -> Result<Vec<Check>> {
    let grid = Grid::new(spec.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng, g: &Arc<Grid>| SpectralVelocity::random(g, rng, g.cutoff(), 1.0);

    let mut energy = Worst::new();
    let mut enstrophy = Worst::new();
    let mut antisym = Worst::new();
    let mut proj = Worst::new();
    let mut parseval = Worst::new();
    let mut roundtrip = Worst::new();
    let mut poincare = Worst::new();
    let mut contraction = Worst::new();
    let mut filter_err = Worst::new();
    let mut smoothing = Worst::new();
    let mut identity = Worst::new();
    let mut momentum = Worst::new();

    for _ in 0..fields {
        let u = draw(&mut rng, &grid);
        let v = draw(&mut rng, &grid);
        let w = draw(&mut rng, &grid);
        let (uv, vv, wv) = (norm(&u, NormKind::V), norm(&v, NormKind::V), norm(&w, NormKind::V));
        let au = apply_stokes_power(&u, 1.0);

        energy.see(trilinear_form(&u, &v, &v)?.abs(), 1e-10 * uv * vv * vv);
        enstrophy.see(trilinear_form(&u, &u, &au)?.abs(), 1e-10 * uv * uv * norm(&u, NormKind::DA));
        let buv = bilinear_b(&u, &v)?;
        let scale = uv * vv * wv;
        antisym.see((inner(&buv, &w) + trilinear_form(&u, &w, &v)?).abs(), 1e-10 * scale);

        let p = project_leray(u.as_field());
        proj.see(norm(&(&p - &u), NormKind::H), 1e-12 * norm(&u, NormKind::H));
        let lhs = inner(&project_leray(buv.as_field()), &w);
        proj.see((lhs - inner(&buv, &project_leray(w.as_field()))).abs(), 1e-12 * scale);

        let phys = to_physical(&u);
        let h = norm(&u, NormKind::H);
        parseval.see((phys.l2_norm() - h).abs() * (phys.l2_norm() + h), 1e-10 * h * h);
        let back = to_spectral(&phys, &grid)?;
        roundtrip.see(norm(&(&back - &u), NormKind::H), 1e-12 * h);
        poincare.see(grid.lambda1() * h * h, uv * uv * (1.0 + 1e-12));

        for alpha in [1.0, 0.1, 0.01] {
            let nw = apply_helmholtz_filter(&w, alpha);
            let wh = norm(&w, NormKind::H);
            contraction.see(norm(&nw, NormKind::H), wh * (1.0 + 1e-12));
            filter_err.see(norm(&(&w - &nw), NormKind::H), 0.5 * alpha * wv * (1.0 + 1e-12));
            smoothing.see(alpha * norm(&nw, NormKind::V), 0.5 * wh * (1.0 + 1e-12));
            let rebuilt = &apply_stokes_power(&nw, 1.0).scaled(alpha * alpha) + &nw;
            identity.see(norm(&(&rebuilt - &w), NormKind::H), 1e-12 * wh);
            let inv = apply_helmholtz_filter(&invert_helmholtz(&w, alpha), alpha);
            identity.see(norm(&(&inv - &w), NormKind::H), 1e-12 * wh);
            let m = energy_monitors(&w, alpha);
            let direct = momentum_energy(&w, alpha);
            momentum.see((m.m1 - direct).abs(), 1e-10 * direct);
        }
    }

    let model = make_noise_model(&grid, noise)?;
    let mut lip_h = Worst::new();
    let mut lip_v = Worst::new();
    let mut grow_h = Worst::new();
    let mut grow_v = Worst::new();
    let mut filt = Worst::new();
    for _ in 0..fields.max(1) * 10 {
        let s1: f64 = rng.random_range(0.1..10.0);
        let s2: f64 = rng.random_range(0.1..10.0);
        let u1 = draw(&mut rng, &grid).scaled(s1);
        let u2 = draw(&mut rng, &grid).scaled(s2);
        let d = &u1 - &u2;
        let hs = hs_distance(&u1, &u2, &model);
        lip_h.see(hs.h(), model.ell0() * norm(&d, NormKind::H) * (1.0 + 1e-12));
        lip_v.see(hs.v(), model.ell1() * norm(&d, NormKind::V) * (1.0 + 1e-12));
        let q = hs_norms_q(&u1, &model);
        grow_h.see(q.h(), model.ell2() * (1.0 + norm(&u1, NormKind::H)) * (1.0 + 1e-12));
        grow_v.see(q.v(), model.ell3() * (1.0 + norm(&u1, NormKind::V)) * (1.0 + 1e-12));
        let alpha = rng.random_range(0.0..1.0);
        filt.see(hs_norms_filtered(&u1, &model, alpha).h(), q.h() * (1.0 + 1e-12));
    }

    Ok(vec![
        energy.check("energy cancellation", "|<B(u,v),v>| <= 1e-10 ||u|| ||v||^2"),
        enstrophy.check("enstrophy cancellation", "|<B(u,u),Au>| <= 1e-10 ||u||^2 |Au|"),
        antisym.check("antisymmetry", "<B(u,v),w> = -<B(u,w),v>"),
        proj.check("leray projection", "idempotent and self-adjoint"),
        parseval.check("parseval", "quadrature L2 norm equals spectral H norm"),
        roundtrip.check("transform round trip", "to_spectral(to_physical(u)) = u"),
        poincare.check("poincare", "lambda_1 |u|^2 <= ||u||^2"),
        contraction.check("filter contraction", "|N_a w| <= |w|"),
        filter_err.check("filter error", "|(I - N_a) w| <= (a/2) |A^{1/2} w|"),
        smoothing.check("filter smoothing", "|a A^{1/2} N_a w| <= |w|/2"),
        identity.check("filter identity", "a^2 A N_a w + N_a w = w"),
        momentum.check("momentum expansion", "m1 = |v^a|^2"),
        lip_h.check("noise lipschitz H", "||Q(u1)-Q(u2)||_HS <= l0 |u1-u2|"),
        lip_v.check("noise lipschitz V", "||A^{1/2}(Q(u1)-Q(u2))||_HS <= l1 ||u1-u2||"),
        grow_h.check("noise growth H", "||Q(u)||_HS <= l2 (1 + |u|)"),
        grow_v.check("noise growth V", "||A^{1/2}Q(u)||_HS <= l3 (1 + ||u||)"),
        filt.check("filtered noise", "||N_a Q(u)||_HS <= ||Q(u)||_HS"),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_small_grid() {
        let spec = GridSpec::new(2.0 * std::f64::consts::PI, 16);
        let noise = NoiseConfig {
            noise_cutoff: 5,
            ..NoiseConfig::default()
        };
        let checks = operator_suite(&spec, &noise, 1, 10).unwrap();
        for c in &checks {
            assert!(c.passed(), "{c}");
        }
    }

    #[test]
    fn worst_ratio_flags_violations() {
        let mut w = Worst::new();
        w.see(2.0, 1.0);
        assert!(!w.check("x", "").passed());
        let mut w = Worst::new();
        w.see(f64::NAN, 1.0);
        assert!(!w.check("x", "").passed());
        let mut w = Worst::new();
        w.see(0.0, 0.0);
        assert!(w.check("x", "").passed());
    }
}
