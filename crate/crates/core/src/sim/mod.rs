//! Scenario description and the discrete-event run loop.

mod engine;
mod overrides;
pub mod presets;
pub mod sweep;

use serde::{Deserialize, Serialize};

use crate::channel::Environment;
use crate::control::ControllerSpec;
use crate::error::{Error, Result};

pub use engine::{run_scenario, run_scenario_with, RunOptions, RunOutput};
pub use overrides::{LoopOverrides, ScenarioOverrides};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Motion {
    Static { distance_m: f64 },
    Ramp { start_m: f64, end_m: f64, duration_s: f64 },
}

impl Motion {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Motion::Static { distance_m } => distance_m.is_finite() && distance_m >= 0.0,
            Motion::Ramp {
                start_m,
                end_m,
                duration_s,
            } => {
                start_m.is_finite()
                    && end_m.is_finite()
                    && start_m >= 0.0
                    && end_m >= 0.0
                    && duration_s.is_finite()
                    && duration_s > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "scenario.motion",
                "distances must be non-negative and ramp duration positive",
            ))
        }
    }
}

/// Separation at time `t_s`. Ramps hold their end distance once complete.
pub fn distance_at(motion: &Motion, t_s: f64) -> f64 {
    match *motion {
        Motion::Static { distance_m } => distance_m,
        Motion::Ramp {
            start_m,
            end_m,
            duration_s,
        } => {
            let frac = (t_s / duration_s).clamp(0.0, 1.0);
            start_m + (end_m - start_m) * frac
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceKind {
    FemRemove,
    FemRestore,
    StepAtten { db: f64 },
}

impl DisturbanceKind {
    pub fn label(&self) -> String {
        match *self {
            DisturbanceKind::FemRemove => "fem_remove".to_string(),
            DisturbanceKind::FemRestore => "fem_restore".to_string(),
            DisturbanceKind::StepAtten { db } => format!("step_atten {db} dB"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub time_s: f64,
    #[serde(flatten)]
    pub kind: DisturbanceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub env: Environment,
    pub controller: ControllerSpec,
    pub duration_s: f64,
    pub motion: Motion,
    #[serde(default)]
    pub disturbances: Vec<Disturbance>,
    pub seed: u64,
    pub fem_initial: bool,
    /// Whether `fem_remove` also takes away the transmit amplification.
    /// The receive gain is always lost.
    #[serde(default = "default_true")]
    pub fem_remove_tx: bool,
    /// Calculation frequency of the throughput estimate.
    #[serde(default = "default_calc_hz")]
    pub throughput_calc_hz: f64,
}

fn default_true() -> bool {
    true
}

fn default_calc_hz() -> f64 {
    1.0
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return Err(Error::invalid("scenario.duration_s", "must be non-negative"));
        }
        self.motion.validate()?;
        for d in &self.disturbances {
            if !(d.time_s.is_finite() && (0.0..=self.duration_s).contains(&d.time_s)) {
                return Err(Error::invalid(
                    "scenario.disturbances",
                    format!("time {} outside [0, {}]", d.time_s, self.duration_s),
                ));
            }
            if let DisturbanceKind::StepAtten { db } = d.kind {
                if !db.is_finite() {
                    return Err(Error::invalid("scenario.disturbances", "attenuation must be finite"));
                }
            }
        }
        if !(self.throughput_calc_hz.is_finite() && self.throughput_calc_hz > 0.0) {
            return Err(Error::invalid("scenario.throughput_calc_hz", "must be positive"));
        }
        self.controller.validate()
    }
}

/// One trace row. Missing values are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t_s: f64,
    pub distance_m: f64,
    pub rssi_dbm: f64,
    pub throughput_kbps: f64,
    pub txp_dbm: f64,
    pub rssi_target_dbm: f64,
    pub power_mw: f64,
    pub connected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t_s: f64,
    pub label: String,
}

pub const EVENT_CONNECT: &str = "connect";
pub const EVENT_DISCONNECT: &str = "disconnect";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub samples: Vec<TraceSample>,
    pub events: Vec<TraceEvent>,
}

impl RunTrace {
    /// Time of the first scripted disturbance, if any.
    pub fn first_disturbance_s(&self) -> Option<f64> {
        self.events
            .iter()
            .find(|e| e.label != EVENT_CONNECT && e.label != EVENT_DISCONNECT)
            .map(|e| e.t_s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Strategy;

    #[test]
    fn distance_examples() {
        let ramp = Motion::Ramp {
            start_m: 0.0,
            end_m: 50.0,
            duration_s: 100.0,
        };
        assert_eq!(distance_at(&ramp, 50.0), 25.0);
        assert_eq!(distance_at(&ramp, 0.0), 0.0);
        assert_eq!(distance_at(&ramp, 100.0), 50.0);
        assert_eq!(distance_at(&Motion::Static { distance_m: 5.0 }, 37.0), 5.0);
    }

    fn spec() -> ScenarioSpec {
        ScenarioSpec {
            name: "t".into(),
            env: Environment::Lab,
            controller: ControllerSpec::for_strategy(Strategy::Rssi),
            duration_s: 10.0,
            motion: Motion::Static { distance_m: 1.0 },
            disturbances: vec![],
            seed: 1,
            fem_initial: true,
            fem_remove_tx: true,
            throughput_calc_hz: 1.0,
        }
    }

    #[test]
    fn validation() {
        spec().validate().unwrap();
        let mut s = spec();
        s.disturbances.push(Disturbance {
            time_s: 11.0,
            kind: DisturbanceKind::FemRemove,
        });
        assert!(s.validate().is_err());
        let mut s = spec();
        s.motion = Motion::Ramp {
            start_m: -1.0,
            end_m: 5.0,
            duration_s: 1.0,
        };
        assert!(s.validate().is_err());
        let mut s = spec();
        s.duration_s = f64::NAN;
        assert!(s.validate().is_err());
    }

    #[test]
    fn disturbance_serde_shape() {
        let d = Disturbance {
            time_s: 2.0,
            kind: DisturbanceKind::StepAtten { db: 6.0 },
        };
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"time_s":2.0,"kind":"step_atten","db":6.0}"#);
    }
}
