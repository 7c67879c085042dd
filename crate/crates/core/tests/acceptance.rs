//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use leray_lab::experiment::output::results_csv;
use leray_lab::experiment::study::Dumps;
use leray_lab::experiment::{fit_rate, run_study, tail_study, StudyConfig, StudyReport, TailRow};
use leray_lab::integrator::{step_leray, step_nse, SimParams};
use leray_lab::noise::{
    apply_q, hs_distance, hs_norms_q, make_noise_model, NoiseConfig, NoiseIncrement, NoiseModel,
};
use leray_lab::nonlinear::trilinear_form;
use leray_lab::spectral::{
    apply_helmholtz_filter, apply_stokes_power, invert_helmholtz, norm, to_spectral, Grid, GridSpec, NormKind,
    PhysicalVelocity, SpectralVelocity,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, elapsed: Duration, o: &Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} [{tag}] {name} ({:.1} s): {}", elapsed.as_secs_f64(), o.detail);
}

fn default_grid() -> Arc<Grid> {
    Grid::new(GridSpec::default()).unwrap()
}

fn random_field(g: &Arc<Grid>, rng: &mut ChaCha8Rng) -> SpectralVelocity {
    SpectralVelocity::random(g, rng, g.cutoff(), 1.0)
}

fn operator_identities() -> Outcome {
    let g = default_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_e, mut worst_s) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let u = random_field(&g, &mut rng);
        let v = random_field(&g, &mut rng);
        let (nu, nv) = (norm(&u, NormKind::V), norm(&v, NormKind::V));
        let e = trilinear_form(&u, &v, &v).unwrap().abs() / (nu * nv * nv);
        let au = apply_stokes_power(&u, 1.0);
        let s = trilinear_form(&u, &u, &au).unwrap().abs() / (nu * nu * norm(&u, NormKind::DA));
        worst_e = worst_e.max(e);
        worst_s = worst_s.max(s);
    }
    Outcome {
        pass: worst_e <= 1e-10 && worst_s <= 1e-10,
        detail: format!("max |<B(u,v),v>|/(||u|| ||v||^2) = {worst_e:.2e}, max |<B(u,u),Au>|/(||u||^2 |Au|) = {worst_s:.2e}"),
    }
}

fn filter_bounds() -> Outcome {
    let g = default_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = [0.0f64; 4];
    for _ in 0..100 {
        let w = random_field(&g, &mut rng);
        let (h, v) = (norm(&w, NormKind::H), norm(&w, NormKind::V));
        for alpha in [1.0, 0.1, 0.01] {
            let nw = apply_helmholtz_filter(&w, alpha);
            let ratios = [
                norm(&nw, NormKind::H) / h,
                norm(&(&w - &nw), NormKind::H) / (0.5 * alpha * v),
                alpha * norm(&nw, NormKind::V) / (0.5 * h),
                norm(&(&(&apply_stokes_power(&nw, 1.0).scaled(alpha * alpha) + &nw) - &w), NormKind::H) / h,
            ];
            for (k, r) in ratios.into_iter().enumerate() {
                worst[k] = worst[k].max(r);
            }
        }
    }
    let pass = worst[..3].iter().all(|&r| r <= 1.0 + 1e-12) && worst[3] <= 1e-12;
    Outcome {
        pass,
        detail: format!(
            "max |N w|/|w| = {:.6}, max |(I-N)w|/((a/2)||w||) = {:.6}, max |aA^(1/2)Nw|/(|w|/2) = {:.6}, identity residual {:.2e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    }
}

/// `||Q(u)||^2` summed column by column, `Q(u)e_j` obtained from a unit increment.
fn brute_force_hs(u: &SpectralVelocity, model: &NoiseModel) -> (f64, f64) {
    let (mut h, mut v) = (0.0, 0.0);
    for j in 0..model.dofs() {
        let mut dw = vec![0.0; model.dofs()];
        dw[j] = 1.0;
        let col = apply_q(u, &NoiseIncrement { dw, dt: 1.0, step: 0 }, model).unwrap();
        h += norm(&col, NormKind::H).powi(2);
        v += norm(&col, NormKind::V).powi(2);
    }
    (h, v)
}

fn noise_assumptions() -> Outcome {
    let g = default_grid();
    let model = make_noise_model(&g, &NoiseConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = [0.0f64; 4];
    let mut brute = 0.0f64;
    for i in 0..1000 {
        let s1 = rng.random_range(0.1..20.0);
        let s2 = rng.random_range(0.1..20.0);
        let u1 = random_field(&g, &mut rng).scaled(s1);
        let u2 = random_field(&g, &mut rng).scaled(s2);
        let d = &u1 - &u2;
        let hs = hs_distance(&u1, &u2, &model);
        let q = hs_norms_q(&u1, &model);
        let ratios = [
            hs.h() / (model.ell0() * norm(&d, NormKind::H)),
            hs.v() / (model.ell1() * norm(&d, NormKind::V)),
            q.h() / (model.ell2() * (1.0 + norm(&u1, NormKind::H))),
            q.v() / (model.ell3() * (1.0 + norm(&u1, NormKind::V))),
        ];
        for (k, r) in ratios.into_iter().enumerate() {
            worst[k] = worst[k].max(r);
        }
        if i % 50 == 0 {
            let (bh, bv) = brute_force_hs(&u1, &model);
            brute = brute.max((bh - q.h_sq).abs() / q.h_sq).max((bv - q.v_sq).abs() / q.v_sq);
        }
    }
    let pass = worst.iter().all(|&r| r <= 1.0 + 1e-12) && brute <= 1e-12;
    Outcome {
        pass,
        detail: format!(
            "worst ratios: lip H {:.4}, lip V {:.4}, growth H {:.4}, growth V {:.4}; closed form vs column sums {:.1e} (l0 = {}, l2 = {:.4}, l3 = {:.4})",
            worst[0],
            worst[1],
            worst[2],
            worst[3],
            brute,
            model.ell0(),
            model.ell2(),
            model.ell3()
        ),
    }
}

fn taylor_green(g: &Arc<Grid>) -> SpectralVelocity {
    let n = g.n();
    let h = g.length() / n as f64;
    let mut x = vec![0.0; n * n];
    let mut y = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let (px, py) = (i as f64 * h, j as f64 * h);
            x[j * n + i] = px.cos() * py.sin();
            y[j * n + i] = -px.sin() * py.cos();
        }
    }
    to_spectral(&PhysicalVelocity { x, y, n, length: g.length() }, g).unwrap()
}

fn taylor_green_deviation(dt: f64) -> (f64, f64) {
    let g = default_grid();
    let u0 = taylor_green(&g);
    let (nu, alpha, horizon) = (1.0, 0.5, 0.1);
    let p = SimParams::new(nu, vec![alpha], dt, horizon, NoiseModel::zero(&g), u0.clone()).unwrap();
    let mut u = u0.clone();
    let mut v = invert_helmholtz(&u0, alpha);
    let (mut dn, mut dl) = (0.0f64, 0.0f64);
    for m in 0..p.steps() {
        let dw = NoiseIncrement { dw: vec![], dt, step: m as u64 };
        u = step_nse(&u, &dw, &p).unwrap();
        let (vn, ua) = step_leray(&v, &dw, alpha, &p).unwrap();
        v = vn;
        let exact = u0.scaled((-2.0 * nu * (m + 1) as f64 * dt).exp());
        let e = norm(&exact, NormKind::H);
        dn = dn.max(norm(&(&u - &exact), NormKind::H) / e);
        dl = dl.max(norm(&(&ua - &exact), NormKind::H) / e);
    }
    (dn, dl)
}

fn exact_solution() -> Outcome {
    let (n1, l1) = taylor_green_deviation(1e-4);
    let (n2, l2) = taylor_green_deviation(5e-5);
    let (rn, rl) = (n1 / n2, l1 / l2);
    let ok = |r: f64| (1.7..=2.3).contains(&r);
    Outcome {
        pass: n1 <= 5e-3 && l1 <= 5e-3 && ok(rn) && ok(rl),
        detail: format!("max deviation NSE {n1:.3e}, Leray {l1:.3e}; halving ratios {rn:.3}, {rl:.3}"),
    }
}

fn deterministic_rate() -> Outcome {
    let mut c = StudyConfig::default();
    c.noise.sigma_a = 0.0;
    c.noise.sigma_b = 0.0;
    c.samples = 1;
    c.threshold = leray_lab::experiment::Threshold::Value(f64::INFINITY);
    let r = run_study(&c, &Dumps::default()).unwrap();
    match fit_rate(&r.ensemble.eps_points()) {
        Ok(fit) => Outcome {
            pass: (0.85..=2.0).contains(&fit.slope),
            detail: format!(
                "slope of eps(T) vs alpha = {:.4} (CI {:.3} .. {:.3}); eps(T) = {:?}",
                fit.slope,
                fit.ci_low,
                fit.ci_high,
                r.ensemble.eps_points().iter().map(|p| p.1).collect::<Vec<_>>()
            ),
        },
        Err(e) => Outcome { pass: false, detail: e.to_string() },
    }
}

fn stochastic_rate(r: &StudyReport) -> Outcome {
    match &r.fit {
        Some(fit) => Outcome {
            pass: fit.slope >= 0.8 && !fit.ci_contains(0.5),
            detail: format!(
                "slope of sqrt(mean loc err) = {:.4}, 95% CI {:.4} .. {:.4}, R = {:.4e}, M = {}",
                fit.slope,
                fit.ci_low,
                fit.ci_high,
                r.ensemble.threshold,
                r.ensemble.samples.len()
            ),
        },
        None => Outcome { pass: false, detail: "rate fit undefined".into() },
    }
}

fn localization(r: &StudyReport) -> Outcome {
    let fracs: Vec<f64> = r.ensemble.levels.iter().map(|l| l.tau_full_frac).collect();
    let markov = r.calibration.map(|c| c.markov_ratio).unwrap_or(f64::NAN);
    Outcome {
        pass: fracs.iter().all(|&f| f >= 0.95),
        detail: format!("tau_R = T fractions {fracs:?} (pilot Markov ratio {markov:.3})"),
    }
}

fn tail(rows: &[TailRow]) -> Outcome {
    let non_increasing = rows.windows(2).all(|w| w[1].freq <= w[0].freq);
    let finest = rows.last().unwrap();
    let listing: Vec<String> = rows
        .iter()
        .map(|r| format!("{}: {}/{} [{:.3}, {:.3}]", r.alpha, r.exceed, r.samples, r.wilson_low, r.wilson_high))
        .collect();
    Outcome {
        pass: non_increasing && finest.freq <= 0.05,
        detail: format!("P(eps >= Gamma_n alpha_n) by alpha: {}", listing.join("; ")),
    }
}

fn monitors(r: &StudyReport) -> Outcome {
    let m1: Vec<f64> = r.ensemble.levels.iter().map(|l| l.max_m1).collect();
    let y: Vec<f64> = r.ensemble.levels.iter().map(|l| l.max_y).collect();
    let spread = |v: &[f64]| v.iter().copied().fold(0.0, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min);
    let (sm, sy) = (spread(&m1), spread(&y));
    let finite = m1.iter().chain(&y).all(|x| x.is_finite() && *x > 0.0);
    Outcome {
        pass: finite && sm < 3.0 && sy < 3.0,
        detail: format!("max m1 by alpha {m1:.4?} (spread {sm:.3}), max y {y:.4?} (spread {sy:.3})"),
    }
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored
    let mut all = true;
    let mut check = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        report(id, name, t.elapsed(), &o);
        all &= o.pass;
    };
    check(1, "operator identities", &mut operator_identities);
    check(2, "filter bounds", &mut filter_bounds);
    check(3, "noise assumptions", &mut noise_assumptions);
    check(4, "Taylor-Green exact solution", &mut exact_solution);
    check(5, "deterministic rate", &mut deterministic_rate);

    let t = Instant::now();
    let parallel_cfg = StudyConfig { threads: 0, ..StudyConfig::default() };
    let study = run_study(&parallel_cfg, &Dumps::default()).expect("default study failed");
    let study_time = t.elapsed();
    println!("default stochastic study finished in {:.1} s", study_time.as_secs_f64());
    check(6, "stochastic localized rate", &mut || stochastic_rate(&study));
    check(7, "localization sanity", &mut || localization(&study));
    let rows = tail_study(&study.ensemble, &parallel_cfg.tail_gamma);
    check(8, "tail study", &mut || tail(&rows));
    check(9, "energy monitor boundedness", &mut || monitors(&study));
    check(10, "determinism serial vs parallel", &mut || {
        let serial_cfg = StudyConfig { threads: 1, ..StudyConfig::default() };
        let serial = run_study(&serial_cfg, &Dumps::default()).expect("serial study failed");
        let a = results_csv(&study.ensemble, study.fit.as_ref());
        let b = results_csv(&serial.ensemble, serial.fit.as_ref());
        Outcome {
            pass: a == b && !a.is_empty(),
            detail: format!("results.csv {} bytes, identical = {}", a.len(), a == b),
        }
    });

    if all {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
