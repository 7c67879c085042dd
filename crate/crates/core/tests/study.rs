use leray_lab::estimators::{localized_error, Criterion, ErrorSeries, LocalizationState};
use leray_lab::experiment::study::{calibrate_r, run_ensemble, Dumps};
use leray_lab::experiment::{run_study, tail_study, GammaSeq, StudyConfig, Threshold};
use leray_lab::integrator::run_coupled;
use leray_lab::noise::{NoiseConfig, NoiseStream};

fn smoke() -> StudyConfig {
    let mut c = StudyConfig::parse_str(
        "n = 16\nnoise_cutoff = 5\nmult_cutoff = 2\ndt = 0.01\nhorizon = 0.2\nalphas = 0.2, 0.1, 0.05\nsamples = 8\nthreads = 1\nr = 1e6\nsigma_a = 0.5\nsigma_b = 0.2\n",
    )
    .unwrap();
    c.out_dir = std::env::temp_dir();
    c
}

#[test]
fn single_deterministic_sample_equals_trajectory() {
    let mut c = smoke();
    c.samples = 1;
    c.noise = NoiseConfig { sigma_a: 0.0, sigma_b: 0.0, ..c.noise.clone() };
    c.alphas = vec![0.1];
    let report = run_study(&c, &Dumps::default()).unwrap();
    let params = c.sim_params().unwrap();
    let traj = run_coupled(&params, NoiseStream::new(c.master_seed, 0)).unwrap();
    let lvl = &report.ensemble.levels[0];
    assert_eq!(lvl.mean_loc_err, localized_error(&traj, 0.1, 1e6, Criterion::L4).unwrap());
    assert_eq!(lvl.mean_eps, ErrorSeries::from_level(&traj.levels[0], traj.dt).eps_final());
    assert_eq!(lvl.sem, 0.0);
    assert!(report.fit.is_none());
}

#[test]
fn standard_error_scales_with_sample_count() {
    let mut c = smoke();
    c.samples = 32;
    let small = run_study(&c, &Dumps::default()).unwrap();
    c.samples = 64;
    let large = run_study(&c, &Dumps::default()).unwrap();
    for (a, b) in small.ensemble.levels.iter().zip(&large.ensemble.levels) {
        let ratio = b.sem / a.sem;
        let expected = std::f64::consts::FRAC_1_SQRT_2;
        assert!((ratio / expected - 1.0).abs() <= 0.3, "alpha {} ratio {ratio}", a.alpha);
        assert!(a.mean_loc_err > 0.0 && a.sem.is_finite());
    }
    // the first 32 samples are shared
    assert_eq!(small.ensemble.samples[..], large.ensemble.samples[..32]);
}

#[test]
fn alpha_order_does_not_change_results() {
    let c = smoke();
    let forward = run_study(&c, &Dumps::default()).unwrap();
    let mut shuffled = smoke();
    shuffled.alphas = vec![0.05, 0.2, 0.1];
    let other = run_study(&shuffled, &Dumps::default()).unwrap();
    assert_eq!(forward.ensemble, other.ensemble);
    assert_eq!(forward.fit, other.fit);

    let mut single = smoke();
    single.alphas = vec![0.1];
    let lone = run_study(&single, &Dumps::default()).unwrap();
    assert_eq!(lone.ensemble.levels[0], forward.ensemble.levels[1]);
}

#[test]
fn serial_and_parallel_agree() {
    let mut c = smoke();
    let serial = run_study(&c, &Dumps::default()).unwrap();
    c.threads = 4;
    let parallel = run_study(&c, &Dumps::default()).unwrap();
    assert_eq!(serial, parallel);
}

#[test]
fn calibration_examples() {
    let mut c = smoke();
    c.noise = NoiseConfig { sigma_a: 0.0, sigma_b: 0.0, ..c.noise.clone() };
    c.pilot_samples = 16;
    let params = c.sim_params().unwrap();
    let cal = calibrate_r(&c, &params).unwrap();
    assert!(cal.threshold.is_finite() && cal.threshold > 0.0);
    let ens = run_ensemble(&c, &params, cal.threshold, &Dumps::default()).unwrap();
    assert!(ens.levels.iter().all(|l| l.tau_full_frac == 1.0));

    let mut c = smoke();
    c.pilot_samples = 20;
    let params = c.sim_params().unwrap();
    let cal = calibrate_r(&c, &params).unwrap();
    assert!(cal.stopped_frac <= 0.05);
    assert!(cal.markov_ratio > 0.0 && cal.markov_ratio < 1.0);

    // R = max over the ensemble of I(T): nobody is stopped
    let ens = run_ensemble(&c, &params, f64::INFINITY, &Dumps::default()).unwrap();
    let max_i = ens.samples.iter().flat_map(|s| s.integral.iter().copied()).fold(0.0, f64::max);
    let at_max = run_ensemble(&c, &params, max_i, &Dumps::default()).unwrap();
    assert!(at_max.levels.iter().all(|l| l.tau_full_frac == 1.0));

    // lowering R never raises the fraction with τ_R = T
    let mut prev = vec![1.0; c.alphas.len()];
    let mut r = max_i;
    for _ in 0..6 {
        r *= 0.5;
        let e = run_ensemble(&c, &params, r, &Dumps::default()).unwrap();
        for (k, l) in e.levels.iter().enumerate() {
            assert!(l.tau_full_frac <= prev[k]);
            prev[k] = l.tau_full_frac;
        }
    }
    assert!(prev.iter().any(|&f| f < 1.0));
}

#[test]
fn localized_error_is_dominated_by_unlocalized() {
    let mut c = smoke();
    c.threshold = Threshold::Value(0.05);
    let params = c.sim_params().unwrap();
    let finite = run_ensemble(&c, &params, 0.05, &Dumps::default()).unwrap();
    let infinite = run_ensemble(&c, &params, f64::INFINITY, &Dumps::default()).unwrap();
    for (a, b) in finite.samples.iter().zip(&infinite.samples) {
        for k in 0..a.loc_err.len() {
            assert!(a.loc_err[k] <= b.loc_err[k]);
        }
    }
}

#[test]
fn omega_implies_full_horizon_on_real_trajectories() {
    let c = smoke();
    let params = c.sim_params().unwrap();
    let traj = run_coupled(&params, NoiseStream::new(c.master_seed, 3)).unwrap();
    for level in &traj.levels {
        let loc = LocalizationState::from_level(level, traj.dt);
        let total = loc.total(Criterion::L4);
        for frac in [0.1, 0.5, 0.9, 0.999, 1.0, 1.5] {
            let r = frac * total;
            if loc.omega(r, Criterion::L4) {
                assert!(loc.reaches_horizon(r, Criterion::L4));
            }
            let tau = loc.stopping_time(r, Criterion::L4);
            assert!(tau <= traj.horizon() + 1e-12);
        }
    }
}

#[test]
fn tail_study_examples() {
    let mut c = smoke();
    let report = run_study(&c, &Dumps::default()).unwrap();
    let rows = tail_study(&report.ensemble, &GammaSeq::Const(0.0));
    assert!(rows.iter().all(|r| r.freq == 1.0));
    let rows = tail_study(&report.ensemble, &GammaSeq::Const(1e9));
    assert!(rows.iter().all(|r| r.freq == 0.0));

    c.noise = NoiseConfig { sigma_a: 0.0, sigma_b: 0.0, ..c.noise.clone() };
    let quiet = run_study(&c, &Dumps::default()).unwrap();
    let rows = tail_study(&quiet.ensemble, &GammaSeq::Log(10.0));
    assert!(rows.iter().all(|r| r.exceed == 0));
    assert_eq!(rows[0].n, 1);
    assert!((rows[0].gamma - 10.0 * (1.0 + 2f64.ln())).abs() < 1e-12);
}

#[test]
fn dumps_write_series_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = smoke();
    c.samples = 2;
    c.snapshot_stride = 5;
    c.series_stride = 4;
    let dumps = Dumps {
        series_dir: Some(dir.path().to_path_buf()),
        snapshot_dir: Some(dir.path().to_path_buf()),
    };
    run_study(&c, &dumps).unwrap();
    let series = std::fs::read_to_string(dir.path().join("series_s1_a0.1.csv")).unwrap();
    let lines: Vec<&str> = series.lines().collect();
    assert_eq!(lines[0], "t,eps_sup,eps_int,m1,y,IV,I4");
    // steps 0, 4, ..., 20
    assert_eq!(lines.len(), 1 + 6);
    let (_, frames) = leray_lab::snapshot::read_snapshot(&dir.path().join("sample_0.bin")).unwrap();
    assert_eq!(frames.iter().map(|f| f.step).collect::<Vec<_>>(), vec![0, 5, 10, 15, 20]);
}

#[test]
fn blow_up_aborts_or_is_counted() {
    let mut c = smoke();
    c.noise.sigma_a = 1e150;
    c.dt = 0.05;
    c.horizon = 5.0;
    c.nu = 1e-3;
    c.samples = 2;
    let err = run_study(&c, &Dumps::default()).unwrap_err();
    assert!(err.is_blow_up(), "{err}");
    c.exploratory = true;
    match run_study(&c, &Dumps::default()) {
        Ok(r) => panic!("expected every sample to blow up, got {:?}", r.ensemble.blown_up),
        Err(e) => assert!(e.to_string().contains("blew up")),
    }
}
