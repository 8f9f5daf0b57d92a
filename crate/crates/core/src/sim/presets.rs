//! Canned scenarios.

use super::{Disturbance, DisturbanceKind, Motion, ScenarioSpec};
use crate::channel::Environment;
use crate::control::{ControllerSpec, Strategy};
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 8] = [
    "rooftop-ramp-rssi",
    "corridor-ramp-throughput",
    "lab-ramp-hybrid",
    "lab-femstep-rssi",
    "lab-femstep-throughput",
    "lab-femstep-hybrid",
    "calcfreq-sweep",
    "txp-sweep",
];

pub const RAMP_END_M: f64 = 50.0;
pub const RAMP_DURATION_S: f64 = 100.0;
pub const FEMSTEP_DISTANCE_M: f64 = 0.3;
pub const FEMSTEP_TIME_S: f64 = 30.0;
pub const FEMSTEP_DURATION_S: f64 = 40.0;
pub const FEMSTEP_RSSI_TARGET_DBM: f64 = -65.0;
pub const FEMSTEP_KBPS_TARGET: f64 = 100.0;
pub const SWEEP_DISTANCE_M: f64 = 5.0;

fn ramp(name: &str, env: Environment, controller: ControllerSpec) -> ScenarioSpec {
    ScenarioSpec {
        name: name.to_string(),
        env,
        controller,
        duration_s: RAMP_DURATION_S,
        motion: Motion::Ramp {
            start_m: 0.0,
            end_m: RAMP_END_M,
            duration_s: RAMP_DURATION_S,
        },
        disturbances: Vec::new(),
        seed: 1,
        fem_initial: true,
        fem_remove_tx: true,
        throughput_calc_hz: 1.0,
    }
}

fn femstep(name: &str, strategy: Strategy) -> ScenarioSpec {
    let mut controller = ControllerSpec::for_strategy(strategy);
    controller.rssi_target_dbm = FEMSTEP_RSSI_TARGET_DBM;
    controller.throughput_target_kbps = FEMSTEP_KBPS_TARGET;
    ScenarioSpec {
        name: name.to_string(),
        env: Environment::Lab,
        controller,
        duration_s: FEMSTEP_DURATION_S,
        motion: Motion::Static {
            distance_m: FEMSTEP_DISTANCE_M,
        },
        disturbances: vec![Disturbance {
            time_s: FEMSTEP_TIME_S,
            kind: DisturbanceKind::FemRemove,
        }],
        seed: 1,
        fem_initial: true,
        fem_remove_tx: true,
        throughput_calc_hz: 1.0,
    }
}

fn static_fixed(name: &str, duration_s: f64) -> ScenarioSpec {
    ScenarioSpec {
        name: name.to_string(),
        env: Environment::Lab,
        controller: ControllerSpec::fixed(20.0),
        duration_s,
        motion: Motion::Static {
            distance_m: SWEEP_DISTANCE_M,
        },
        disturbances: Vec::new(),
        seed: 1,
        fem_initial: true,
        fem_remove_tx: true,
        throughput_calc_hz: 1.0,
    }
}

pub fn preset(name: &str) -> Result<ScenarioSpec> {
    let spec = match name {
        "rooftop-ramp-rssi" => ramp(name, Environment::Rooftop, ControllerSpec::for_strategy(Strategy::Rssi)),
        "corridor-ramp-throughput" => ramp(
            name,
            Environment::Corridor,
            ControllerSpec::for_strategy(Strategy::Throughput),
        ),
        "lab-ramp-hybrid" => ramp(name, Environment::Lab, ControllerSpec::for_strategy(Strategy::Hybrid)),
        "lab-femstep-rssi" => femstep(name, Strategy::Rssi),
        "lab-femstep-throughput" => femstep(name, Strategy::Throughput),
        "lab-femstep-hybrid" => femstep(name, Strategy::Hybrid),
        "calcfreq-sweep" => static_fixed(name, 4000.0),
        "txp-sweep" => static_fixed(name, 200.0),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(spec)
}

/// Whether the preset names a sweep rather than a single run.
pub fn is_sweep(name: &str) -> bool {
    matches!(name, "calcfreq-sweep" | "txp-sweep")
}

/// The same scenario driven at a constant transmit power.
pub fn fixed_baseline(spec: &ScenarioSpec, txp_dbm: f64) -> ScenarioSpec {
    let mut out = spec.clone();
    out.controller = ControllerSpec {
        strategy: Strategy::Fixed,
        fixed_txp_dbm: txp_dbm,
        ..spec.controller.clone()
    };
    out.name = format!("{}-fixed{}", spec.name, txp_dbm);
    out
}
