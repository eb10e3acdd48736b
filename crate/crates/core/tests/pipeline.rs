use std::f64::consts::FRAC_PI_4;

use dtqw_core::harness::report::{distribution_csv, from_json_str, to_csv_string, to_json_string};
use dtqw_core::harness::{
    emit_report, run_experiment, run_sweep, simulate, validate_truncation, ExperimentConfig, OutputFormat, Report,
    SweepAxis, SweepSpec,
};
use dtqw_core::lindblad::{read_snapshots, write_snapshots};
use dtqw_core::{
    build_collapse_set, build_schedule, evolve_schedule, CoinState, DecoherenceRates, DensityMatrix, IntegratorConfig,
    Schedule, StateSpace,
};
use ndarray::Array1;
use num_complex::Complex64;
use proptest::prelude::*;

fn cfg(n: usize, coin: CoinState, rates: DecoherenceRates) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.device.n_steps = n;
    c.coin0 = coin;
    c.rates = rates;
    c
}

fn without_wall_ms(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
}

fn purity(rho: &DensityMatrix) -> f64 {
    rho.matrix().dot(rho.matrix()).diag().sum().re
}

#[test]
fn empty_schedule_leaves_state_unchanged() {
    let space = StateSpace::truncated(2).unwrap();
    let cfg = cfg(2, CoinState::plus_i(), DecoherenceRates::t0());
    let mut psi = Array1::zeros(space.dim());
    psi[3] = Complex64::new(0.6, 0.0);
    psi[4] = Complex64::new(0.0, 0.8);
    let rho0 = DensityMatrix::pure(&psi);
    let collapses = build_collapse_set(&space, &cfg.rates).unwrap();
    let ev = evolve_schedule(
        &rho0,
        &Schedule::empty(cfg.device.clone()),
        &collapses,
        &IntegratorConfig::default(),
        true,
    )
    .unwrap();
    assert_eq!(ev.state.matrix(), rho0.matrix());
    assert!(ev.snapshots.is_empty());
}

#[test]
fn single_step_without_decoherence_stays_pure() {
    let space = StateSpace::truncated(1).unwrap();
    let (ev, dist) = simulate(&cfg(1, CoinState::one(), DecoherenceRates::zero()), &space, false).unwrap();
    assert!(ev.state.trace_error() < 1e-9);
    assert!((purity(&ev.state) - 1.0).abs() < 1e-9);
    assert!((dist.p[0] - 0.5).abs() < 1e-9);
    assert!((dist.p[1] - 0.5).abs() < 1e-9);
}

#[test]
fn ten_steps_at_reference_lifetimes_preserve_trace() {
    let c = cfg(10, CoinState::plus_i(), DecoherenceRates::t0());
    let space = StateSpace::truncated(10).unwrap();
    let schedule = build_schedule(&space, &c.device).unwrap();
    assert_eq!(schedule.segments.len(), 30);
    assert!((schedule.total_duration() - 0.1125).abs() < 1e-12);
    let (ev, dist) = simulate(&c, &space, true).unwrap();
    assert!(ev.state.trace_error() < 1e-8);
    assert!(ev.state.min_eigenvalue() > -1e-10);
    assert_eq!(ev.snapshots.len(), 10);
    assert!(dist.total() > 0.99 && dist.total() <= 1.0 + 1e-12);
}

#[test]
fn snapshots_round_trip_through_file() {
    let c = cfg(2, CoinState::plus_i(), DecoherenceRates::t0());
    let space = StateSpace::truncated(2).unwrap();
    let (ev, _) = simulate(&c, &space, true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snaps.bin");
    write_snapshots(&path, &ev.snapshots).unwrap();
    let back = read_snapshots(&path).unwrap();
    assert_eq!(back.len(), 2);
    for (a, b) in back.iter().zip(&ev.snapshots) {
        assert_eq!(a.matrix(), b.matrix());
    }
    assert_eq!(back[1].matrix(), ev.state.matrix());
}

#[test]
fn truncation_matches_full_space() {
    let exact = validate_truncation(&cfg(2, CoinState::plus_i(), DecoherenceRates::zero())).unwrap();
    assert!(exact.max_distribution_deviation < 1e-9);
    assert!(exact.multi_excitation_population < 1e-12);

    let one = validate_truncation(&cfg(1, CoinState::one(), DecoherenceRates::t0())).unwrap();
    assert!(one.max_distribution_deviation < 1e-9);
    assert!(one.max_residual_deviation < 1e-9);

    let noisy = validate_truncation(&cfg(2, CoinState::plus_i(), DecoherenceRates::t0())).unwrap();
    assert_eq!((noisy.truncated_dim, noisy.full_dim), (9, 108));
    assert!(noisy.max_distribution_deviation < 1e-6);
    assert!(noisy.s_deviation < 1e-6);
}

#[test]
fn single_point_sweep_equals_run() {
    let c = cfg(3, CoinState::zero(), DecoherenceRates::t0());
    let swept = run_sweep(&c, &SweepSpec::new(SweepAxis::Scale, vec![1.0])).unwrap();
    let direct = run_experiment(&c).unwrap();
    assert_eq!(
        without_wall_ms(&to_csv_string(&swept).unwrap()),
        without_wall_ms(&to_csv_string(&[direct]).unwrap())
    );
}

#[test]
fn identical_configs_give_identical_csv() {
    let c = cfg(4, CoinState::plus_i(), DecoherenceRates::t0().with_scale(0.2));
    let a = to_csv_string(&[run_experiment(&c).unwrap()]).unwrap();
    let b = to_csv_string(&[run_experiment(&c).unwrap()]).unwrap();
    assert_eq!(a.lines().count(), 2);
    assert_eq!(without_wall_ms(&a), without_wall_ms(&b));
}

#[test]
fn similarity_decreases_with_steps_at_every_scale() {
    let base = cfg(1, CoinState::plus_i(), DecoherenceRates::t0());
    let spec = SweepSpec::new(SweepAxis::NSteps, (1..=6).map(f64::from).collect())
        .crossed(SweepAxis::Scale, vec![5.0, 1.0, 0.2]);
    let reports = run_sweep(&base, &spec).unwrap();
    assert_eq!(reports.len(), 18);
    for scale in [5.0, 1.0, 0.2] {
        let s: Vec<f64> = reports
            .iter()
            .filter(|r| r.config.rates.scale == scale)
            .map(|r| r.metrics.as_ref().unwrap().s)
            .collect();
        assert_eq!(s.len(), 6);
        assert!(s.windows(2).all(|w| w[1] <= w[0] + 1e-3), "scale {scale}: {s:?}");
    }
}

#[test]
fn sweep_failures_become_rows() {
    let mut base = cfg(2, CoinState::plus_i(), DecoherenceRates::t0());
    base.device.omega_rabi = dtqw_core::statespace::mhz_to_angular(0.5);
    base.integrator.min_steps_per_segment = 1;
    base.integrator.max_halvings = 0;
    let reports = run_sweep(&base, &SweepSpec::new(SweepAxis::G, vec![0.5, 50.0])).unwrap();
    assert_eq!(reports.len(), 2);
    assert!(reports[0].metrics.is_some());
    assert!(reports[1].error.as_deref().unwrap().contains("converge"));
    let csv = to_csv_string(&reports).unwrap();
    assert!(csv.lines().nth(2).unwrap().ends_with(",,,,,,"));
}

#[test]
fn reports_round_trip_through_json_file() {
    let report = run_experiment(&cfg(2, CoinState::one(), DecoherenceRates::t0())).unwrap();
    let text = to_json_string(std::slice::from_ref(&report)).unwrap();
    assert_eq!(from_json_str(&text).unwrap(), vec![report.clone()]);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out/run.json");
    emit_report(std::slice::from_ref(&report), &path, OutputFormat::Json).unwrap();
    let back: Vec<Report> = from_json_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, vec![report]);
}

#[test]
fn distribution_table_has_one_row_per_site() {
    let m = run_experiment(&cfg(6, CoinState::plus_i(), DecoherenceRates::t0()))
        .unwrap()
        .metrics
        .unwrap();
    let table = distribution_csv(&m.p_me, &m.p_id).unwrap();
    assert_eq!(table.lines().count(), 8);
    assert!(table.starts_with("site,P_me,P_id\n1,"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn decoherence_free_walk_is_exact(
        n in 1usize..4,
        theta in 0.2f64..1.3,
        re0 in -1.0f64..1.0,
        im1 in -1.0f64..1.0,
    ) {
        prop_assume!(re0.abs() + im1.abs() > 0.1);
        let norm = (re0 * re0 + im1 * im1).sqrt();
        let coin = CoinState::new(Complex64::new(re0 / norm, 0.0), Complex64::new(0.0, im1 / norm)).unwrap();
        let mut c = cfg(n, coin, DecoherenceRates::zero());
        c.device.theta = theta;
        c.integrator.min_steps_per_segment = 200;
        let m = run_experiment(&c).unwrap().metrics.unwrap();
        prop_assert!((m.s - 1.0).abs() < 1e-6, "S = {}", m.s);
        prop_assert!(m.trace_error < 1e-8);
    }
}

#[test]
fn hadamard_reference_is_symmetric_under_plus_i() {
    let d = dtqw_core::run_ideal(20, FRAC_PI_4, CoinState::plus_i()).unwrap();
    assert_eq!(d.p.len(), 21);
    for j in 0..21 {
        assert!((d.p[j] - d.p[20 - j]).abs() < 1e-12);
    }
}
