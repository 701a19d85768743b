use loopforge_core::controller::PDGains;
use loopforge_core::harness::*;
use loopforge_core::plant::{FaultEvent, FaultKind};
use loopforge_core::sensing::SensorNoise;

fn quiet_steps() -> ScenarioConfig {
    let mut c = presets::tracking();
    c.scenario.variant = ControllerVariant::FixedBaseline;
    c.scenario.duration = 12.0;
    c.scenario.cycles = 4;
    c.scenario.setpoint = SetpointProfile::Steps {
        levels: vec![0.2, -0.1, 0.3, 0.0],
    };
    c.scenario.disturbance = DisturbanceSpec::default();
    c.scenario.sensor_noise = SensorNoise::ZERO;
    // ζ = 1, ω_n = 10 rad/s
    c.controller.gains = PDGains { k_p: 100.0, k_d: 20.0 };
    c
}

#[test]
fn well_tuned_pd_succeeds_every_cycle() {
    // Critically damped: |e(t)| <= Δ(1 + ω t)e^{-ω t}. The worst step is
    // 0.4 rad, torque saturation only delays the start, and at the tail
    // start (2.4 s in) the bound is far below the 0.02 band.
    let c = quiet_steps();
    let bound = 0.4 * (1.0 + 10.0 * 2.0) * (-10.0f64 * 2.0).exp();
    assert!(bound < 0.02 * 1e-3);
    let out = run_episode(&c).unwrap();
    assert_eq!(out.metrics.success_rate, 1.0);
    assert!(out.metrics.cycle_success.iter().all(|&ok| ok));
}

#[test]
fn same_config_and_seed_give_identical_traces() {
    let c = presets::disturbance_heavy();
    let a = run_episode(&c).unwrap();
    let b = run_episode(&c).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.params, b.params);
}

#[test]
fn baseline_never_trains() {
    let c = presets::disturbance_heavy().with_variant(ControllerVariant::FixedBaseline);
    let out = run_episode(&c).unwrap();
    assert_eq!(out.training_updates, 0);
    assert!(out.params.is_none());
    assert_eq!(out.final_gains, c.controller.gains);
    assert!(out.trace.records.iter().all(|r| r.action == 0));
}

#[test]
fn adaptive_trains_between_cycles() {
    let out = run_episode(&presets::disturbance_heavy()).unwrap();
    assert!(out.training_updates > 0);
    assert!(out.params.is_some());
}

#[test]
fn trace_has_one_record_per_tick() {
    let c = presets::tracking();
    let out = run_episode(&c).unwrap();
    assert_eq!(out.trace.records.len(), 6000);
    assert_eq!(out.trace.records.len(), c.total_ticks());
    for (k, r) in out.trace.records.iter().enumerate() {
        assert!((r.time - (k + 1) as f64 * 0.01).abs() < 1e-9);
    }
    assert!(out.trace.records.windows(2).all(|w| w[1].time > w[0].time));
}

fn synthetic(config: &ScenarioConfig, error_at: impl Fn(f64) -> f64) -> EpisodeTrace {
    let period = config.control_period();
    let records = (0..config.total_ticks())
        .map(|k| {
            let time = (k + 1) as f64 * period;
            TraceRecord {
                time,
                q: -error_at(time),
                q_dot: 0.0,
                q_d: 0.0,
                tau: 0.0,
                action: 0,
                reward: 0.0,
                energy: 0.0,
                useful_work: 0.0,
                fault_active: false,
            }
        })
        .collect();
    EpisodeTrace {
        seed: 0,
        control_period: period,
        records,
    }
}

fn synthetic_config() -> ScenarioConfig {
    let mut c = presets::fault_recovery();
    c.scenario.duration = 20.0;
    c.scenario.cycles = 4;
    c.faults = vec![FaultEvent {
        onset: 10.0,
        duration: 1.0,
        kind: FaultKind::BiasTorque,
        magnitude: 1.0,
    }];
    c
}

#[test]
fn response_time_on_hand_built_trace() {
    let c = synthetic_config();
    let trace = synthetic(&c, |t| if (10.0 - 1e-9..12.0 - 1e-9).contains(&t) { 0.5 } else { 0.0 });
    let m = compute_metrics(&trace, &c).unwrap();
    assert_eq!(m.fault_responses.len(), 1);
    assert!(m.fault_responses[0].recovered);
    assert!((m.fault_responses[0].response_time - 2.0).abs() < 1e-9);
    assert!((m.mean_fault_response.unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn short_dips_into_band_do_not_count_as_recovery() {
    let c = synthetic_config();
    // In band for 0.5 s at 11 s, then out again until 13 s.
    let trace = synthetic(&c, |t| {
        if (10.0 - 1e-9..11.0 - 1e-9).contains(&t) || (11.5 - 1e-9..13.0 - 1e-9).contains(&t) {
            0.5
        } else {
            0.0
        }
    });
    let m = compute_metrics(&trace, &c).unwrap();
    assert!((m.fault_responses[0].response_time - 3.0).abs() < 1e-9);
}

#[test]
fn unrecovered_fault_is_censored_at_trace_end() {
    let c = synthetic_config();
    let trace = synthetic(&c, |t| if t >= 10.0 - 1e-9 { 0.5 } else { 0.0 });
    let m = compute_metrics(&trace, &c).unwrap();
    assert!(!m.fault_responses[0].recovered);
    assert!((m.fault_responses[0].response_time - 10.0).abs() < 1e-9);
}

#[test]
fn zero_error_trace() {
    let mut c = synthetic_config();
    c.faults.clear();
    c.scenario.kind = ScenarioKind::Tracking;
    let trace = synthetic(&c, |_| 0.0);
    let m = compute_metrics(&trace, &c).unwrap();
    assert_eq!(m.success_rate, 1.0);
    assert_eq!(m.positional_error_variance, 0.0);
    assert_eq!(m.mean_fault_response, None);
    assert!(m.fault_responses.is_empty());
    assert_eq!(m.efficiency, None);
}

#[test]
fn cycle_success_looks_only_at_the_tail() {
    let mut c = synthetic_config();
    c.faults.clear();
    c.scenario.kind = ScenarioKind::Tracking;
    // Cycles are 5 s; the tail is the last 1 s.
    let trace = synthetic(&c, |t| {
        if t < 3.9 {
            1.0
        } else if (5.0..9.0).contains(&t) {
            0.0
        } else if (9.0..10.0 - 1e-9).contains(&t) {
            0.03
        } else {
            0.0
        }
    });
    let m = compute_metrics(&trace, &c).unwrap();
    assert_eq!(m.cycle_success, vec![true, false, true, true]);
    assert_eq!(m.success_rate, 0.75);
}

#[test]
fn metrics_reject_mismatched_traces() {
    let c = synthetic_config();
    let mut trace = synthetic(&c, |_| 0.0);
    trace.records.pop();
    assert!(compute_metrics(&trace, &c).is_err());
    trace.records.clear();
    assert!(compute_metrics(&trace, &c).is_err());
    let mut trace = synthetic(&c, |_| 0.0);
    trace.control_period = 0.02;
    assert!(compute_metrics(&trace, &c).is_err());
}

#[test]
fn vibration_variance_matches_textbook_formula() {
    let c = presets::vibration();
    let out = run_episode(&c.with_variant(ControllerVariant::FixedBaseline)).unwrap();
    // Welford's running update as an independent reference.
    let (mut n, mut mean, mut m2) = (0.0f64, 0.0f64, 0.0f64);
    for r in &out.trace.records {
        let x = r.q_d - r.q;
        n += 1.0;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    let textbook = m2 / n;
    assert!((out.metrics.positional_error_variance - textbook).abs() < 1e-12);
}

#[test]
fn metrics_are_recomputable_from_the_trace() {
    let c = presets::disturbance_heavy();
    let out = run_episode(&c).unwrap();
    assert_eq!(compute_metrics(&out.trace, &c).unwrap(), out.metrics);
}

#[test]
fn self_comparison_gives_unit_ratios() {
    let mut c = presets::disturbance_heavy();
    c.scenario.duration = 12.0;
    c.scenario.cycles = 4;
    let base = c.with_variant(ControllerVariant::FixedBaseline);
    let seeds = replicate_seeds(3, 2);
    let cmp = compare_arms(&base, &base, 3, &seeds, false);
    for m in &cmp.report.summary {
        if let Some(r) = m.ratio {
            assert_eq!(r, 1.0, "{}", m.metric);
        }
        if let Some(d) = m.difference {
            assert_eq!(d, 0.0, "{}", m.metric);
        }
    }
    assert_eq!(cmp.report.metric("success_rate").unwrap().ratio.is_some(), true);
}

#[test]
fn recorded_seeds_reproduce_the_report() {
    let mut c = presets::fault_recovery();
    c.scenario.duration = 60.0;
    c.faults.truncate(1);
    let report = run_comparison(&c, 2);
    assert_eq!(report.seeds.len(), 2);
    let again = compare_arms(
        &c.with_variant(ControllerVariant::FixedBaseline),
        &c.with_variant(ControllerVariant::Adaptive),
        report.master_seed,
        &report.seeds,
        false,
    );
    assert_eq!(again.report, report);
}

#[test]
fn paired_arms_see_the_same_environment() {
    let c = presets::fault_recovery();
    let mut c = c.with_seed(11);
    c.scenario.duration = 120.0;
    c.faults.truncate(2);
    let mut rs = presets::disturbance_heavy().with_seed(11);
    rs.scenario.duration = 12.0;
    rs.scenario.cycles = 4;
    for cfg in [c, rs] {
        let seeds = replicate_seeds(11, 2);
        let cmp = compare_arms(
            &cfg.with_variant(ControllerVariant::FixedBaseline),
            &cfg.with_variant(ControllerVariant::Adaptive),
            11,
            &seeds,
            true,
        );
        assert_eq!(cmp.traces.len(), 4);
        for pair in cmp.traces.chunks(2) {
            let (b, a) = (&pair[0].2, &pair[1].2);
            assert_eq!(pair[0].0, pair[1].0);
            assert_eq!(b.records.len(), a.records.len());
            for (rb, ra) in b.records.iter().zip(&a.records) {
                assert_eq!(rb.q_d, ra.q_d);
                assert_eq!(rb.fault_active, ra.fault_active);
                assert_eq!(rb.time, ra.time);
            }
        }
    }
}

#[test]
fn distinct_replicate_seeds() {
    let seeds = replicate_seeds(42, 5);
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), 5);
    assert_eq!(replicate_seeds(42, 3), seeds[..3]);
}

#[test]
fn invalid_configs_are_rejected_before_running() {
    let mut c = presets::tracking();
    c.scenario.cycles = 7;
    let err = run_episode(&c).unwrap_err();
    assert!(err.partial.records.is_empty());
    assert!(err.to_string().contains("scenario.cycles"), "{err}");

    let mut c = presets::tracking();
    c.scenario.duration = 10.005;
    assert!(c.validate().unwrap_err().to_string().contains("scenario.duration"));

    let mut c = presets::fault_recovery();
    c.faults.clear();
    assert!(c.validate().is_err());
}

#[test]
fn divergence_stops_with_a_partial_trace() {
    let mut c = quiet_steps();
    // Inertia near zero with a stiff loop makes the explicit scheme blow up.
    c.plant.inertia = 1e-9;
    c.controller.tau_max = 1e300;
    c.controller.gains = PDGains { k_p: 200.0, k_d: 30.0 };
    let err = run_episode(&c).unwrap_err();
    assert!(err.time < 12.0);
    assert!(err.partial.records.len() < c.total_ticks());
}
