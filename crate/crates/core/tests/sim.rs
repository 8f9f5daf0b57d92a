use ble_txpc::channel::{expected_throughput, path_loss, Environment};
use ble_txpc::control::ControllerSpec;
use ble_txpc::radio::{effective_tx_power, FemModel};
use ble_txpc::report::trace_to_csv;
use ble_txpc::sim::presets::{is_sweep, preset, PRESET_NAMES};
use ble_txpc::sim::{run_scenario_with, Disturbance, DisturbanceKind, Motion, RunOptions, EVENT_DISCONNECT};
use ble_txpc::{run_scenario, ModelConfig, ScenarioSpec, Strategy};

fn quiet_model() -> ModelConfig {
    let mut m = ModelConfig::default();
    for env in Environment::ALL {
        let p = m.env.get_mut(env);
        p.shadow_sigma_db = 0.0;
        p.fade_sigma_db = 0.0;
    }
    m
}

fn static_fixed(env: Environment, distance_m: f64, txp: f64, duration_s: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: "static".into(),
        env,
        controller: ControllerSpec::fixed(txp),
        duration_s,
        motion: Motion::Static { distance_m },
        disturbances: Vec::new(),
        seed: 7,
        fem_initial: true,
        fem_remove_tx: true,
        throughput_calc_hz: 1.0,
    }
}

#[test]
fn same_seed_gives_identical_traces() {
    let model = ModelConfig::default();
    for name in PRESET_NAMES.iter().filter(|n| !is_sweep(n)) {
        let mut spec = preset(name).unwrap();
        spec.seed = 99;
        let a = run_scenario(&spec, &model).unwrap();
        let b = run_scenario(&spec, &model).unwrap();
        assert_eq!(trace_to_csv(&a.samples), trace_to_csv(&b.samples), "{name}");
        assert_eq!(a.events, b.events, "{name}");
    }
}

#[test]
fn different_seeds_differ() {
    let model = ModelConfig::default();
    let mut spec = preset("lab-ramp-hybrid").unwrap();
    let a = trace_to_csv(&run_scenario(&spec, &model).unwrap().samples);
    spec.seed += 1;
    let b = trace_to_csv(&run_scenario(&spec, &model).unwrap().samples);
    assert_ne!(a, b);
}

#[test]
fn zero_duration_has_no_rows() {
    let mut spec = preset("rooftop-ramp-rssi").unwrap();
    spec.duration_s = 0.0;
    let t = run_scenario(&spec, &ModelConfig::default()).unwrap();
    assert!(t.samples.is_empty());
}

#[test]
fn packet_engine_matches_oracle_in_closed_loop_harness() {
    let model = quiet_model();
    let env = model.env.get(Environment::Rooftop);
    let fem = FemModel::default();
    for txp in [-16.0, -10.0, -6.0, 0.0] {
        let spec = static_fixed(Environment::Rooftop, 5.0, txp, 600.0);
        let opts = RunOptions {
            record_trace: true,
            rssi_sample_hz: None,
            keep_throughput_history: false,
        };
        let out = run_scenario_with(&spec, &model, &opts).unwrap();
        let rssi = effective_tx_power(txp, &fem) + fem.rx_gain() - path_loss(env, 5.0);
        let oracle = expected_throughput(env, rssi, &model.link);
        let sim = out.throughput_stats.mean().unwrap();
        assert!(
            (sim - oracle).abs() <= 0.1 * oracle,
            "txp {txp}: sim {sim} oracle {oracle}"
        );
        for s in out.trace.samples.iter().filter(|s| s.rssi_dbm.is_finite()) {
            assert!((s.rssi_dbm - rssi).abs() < 1e-9);
            assert_eq!(s.txp_dbm, txp);
        }
    }
}

#[test]
fn every_strategy_stays_on_grid() {
    let model = ModelConfig::default();
    for name in PRESET_NAMES.iter().filter(|n| !is_sweep(n)) {
        let t = run_scenario(&preset(name).unwrap(), &model).unwrap();
        assert!(t.samples.iter().all(|s| model.table.contains(s.txp_dbm)), "{name}");
    }
}

#[test]
fn rows_are_strictly_increasing_in_time() {
    let t = run_scenario(&preset("lab-femstep-hybrid").unwrap(), &ModelConfig::default()).unwrap();
    assert!(t.samples.windows(2).all(|w| w[0].t_s < w[1].t_s));
}

#[test]
fn disturbance_does_not_change_the_past() {
    let model = ModelConfig::default();
    let with = preset("lab-femstep-throughput").unwrap();
    let mut without = with.clone();
    without.disturbances.clear();
    let a = run_scenario(&with, &model).unwrap();
    let b = run_scenario(&without, &model).unwrap();
    let step = with.disturbances[0].time_s;
    let before = |s: &[ble_txpc::sim::TraceSample]| {
        trace_to_csv(&s.iter().copied().filter(|r| r.t_s < step).collect::<Vec<_>>())
    };
    assert_eq!(before(&a.samples), before(&b.samples));
    assert_ne!(trace_to_csv(&a.samples), trace_to_csv(&b.samples));
}

#[test]
fn deep_fade_disconnects_after_supervision_timeout_and_stays_down() {
    let model = quiet_model();
    let mut spec = static_fixed(Environment::Lab, 2.0, 0.0, 20.0);
    spec.disturbances = vec![Disturbance {
        time_s: 5.0,
        kind: DisturbanceKind::StepAtten { db: 80.0 },
    }];
    let t = run_scenario(&spec, &model).unwrap();
    let disc: Vec<_> = t.events.iter().filter(|e| e.label == EVENT_DISCONNECT).collect();
    assert_eq!(disc.len(), 1);
    let at = disc[0].t_s;
    assert!(at > 5.0 + 2.7 && at <= 5.0 + 3.2 + 0.4 + 1e-9, "disconnect at {at}");
    assert!(t.samples.iter().filter(|s| s.t_s > at).all(|s| !s.connected));
    assert!(t.samples.iter().filter(|s| s.t_s < 5.0).all(|s| s.connected));
}

#[test]
fn ramp_distance_follows_motion() {
    let spec = preset("corridor-ramp-throughput").unwrap();
    let t = run_scenario(&spec, &ModelConfig::default()).unwrap();
    for s in &t.samples {
        assert!(
            (s.distance_m - 0.5 * s.t_s).abs() < 1e-9,
            "{} at {}",
            s.distance_m,
            s.t_s
        );
    }
}

#[test]
fn fem_removal_costs_twenty_five_db_of_rssi() {
    let model = quiet_model();
    let mut spec = static_fixed(Environment::Lab, 0.3, -10.0, 10.0);
    spec.disturbances = vec![Disturbance {
        time_s: 5.0,
        kind: DisturbanceKind::FemRemove,
    }];
    let t = run_scenario(&spec, &model).unwrap();
    let at = |pred: &dyn Fn(f64) -> bool| {
        t.samples
            .iter()
            .find(|s| pred(s.t_s) && s.rssi_dbm.is_finite())
            .unwrap()
            .rssi_dbm
    };
    let before = at(&|x| x > 1.0 && x < 5.0);
    let after = at(&|x| x > 5.5);
    assert!((before - after - 25.0).abs() < 1e-9, "{before} -> {after}");
}

#[test]
fn hybrid_target_stays_in_range() {
    let spec = preset("lab-ramp-hybrid").unwrap();
    assert_eq!(spec.controller.strategy, Strategy::Hybrid);
    let t = run_scenario(&spec, &ModelConfig::default()).unwrap();
    for s in &t.samples {
        assert!((-90.0..=-20.0).contains(&s.rssi_target_dbm), "{}", s.rssi_target_dbm);
    }
}
