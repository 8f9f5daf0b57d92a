//! Incremental PID law and the transmit power controllers built on it.
//!
//! Every controller produces a bounded per-tick adjustment that is added to
//! a continuous power setpoint. The setpoint is clamped to the table range
//! and quantized on the way out, so the actuator only ever sees table
//! levels while sub-step adjustments still accumulate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::TxPowerTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidConfig {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Largest magnitude of one increment.
    pub output_clamp: f64,
    pub update_hz: f64,
    /// Bound on `|ki * integral|`.
    pub integral_clamp: f64,
}

impl PidConfig {
    pub fn new(kp: f64, ki: f64, kd: f64, update_hz: f64) -> Self {
        PidConfig {
            kp,
            ki,
            kd,
            output_clamp: 2.0,
            update_hz,
            integral_clamp: 2.0,
        }
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.update_hz
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        for (field, v) in [
            ("kp", self.kp),
            ("ki", self.ki),
            ("kd", self.kd),
            ("output_clamp", self.output_clamp),
            ("update_hz", self.update_hz),
            ("integral_clamp", self.integral_clamp),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name}.{field}"), "must be finite"));
            }
        }
        if self.update_hz <= 0.0 {
            return Err(Error::invalid(format!("{name}.update_hz"), "must be positive"));
        }
        if self.output_clamp <= 0.0 {
            return Err(Error::invalid(format!("{name}.output_clamp"), "must be positive"));
        }
        if self.integral_clamp < self.output_clamp {
            return Err(Error::invalid(
                format!("{name}.integral_clamp"),
                "must be at least output_clamp",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PidState {
    /// Accumulated error times seconds.
    pub integral: f64,
    pub prev_error: f64,
    pub initialized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidOutput {
    /// Unclamped law output.
    pub raw: f64,
    /// `raw` clamped to the output limit.
    pub increment: f64,
}

/// One step of the incremental PID law.
///
/// The derivative acts on the error and is zero on the first call. The
/// integral stops accumulating while the output saturates in the direction
/// of the error, and `|ki * integral|` never exceeds `integral_clamp`.
pub fn pid_step(cfg: &PidConfig, state: &mut PidState, error: f64, dt: f64) -> PidOutput {
    debug_assert!(dt > 0.0);
    let derivative = if state.initialized {
        (error - state.prev_error) / dt
    } else {
        0.0
    };
    let candidate = if cfg.ki != 0.0 {
        let bound = cfg.integral_clamp / cfg.ki.abs();
        (state.integral + error * dt).clamp(-bound, bound)
    } else {
        state.integral
    };
    let raw = cfg.kp * error + cfg.ki * candidate + cfg.kd * derivative;
    let increment = raw.clamp(-cfg.output_clamp, cfg.output_clamp);
    let winding_up = raw.abs() > cfg.output_clamp && error * raw > 0.0;
    if !winding_up {
        state.integral = candidate;
    }
    state.prev_error = error;
    state.initialized = true;
    PidOutput { raw, increment }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Fixed,
    Rssi,
    Throughput,
    Hybrid,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Fixed, Strategy::Rssi, Strategy::Throughput, Strategy::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Fixed => "fixed",
            Strategy::Rssi => "rssi",
            Strategy::Throughput => "throughput",
            Strategy::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Strategy::Fixed),
            "rssi" => Ok(Strategy::Rssi),
            "throughput" => Ok(Strategy::Throughput),
            "hybrid" => Ok(Strategy::Hybrid),
            other => Err(Error::invalid("strategy", format!("unknown strategy `{other}`"))),
        }
    }
}

/// Complete controller description.
///
/// `inner` is the RSSI loop (standalone RSSI strategy or hybrid inner
/// loop); `outer` is the throughput loop (standalone throughput strategy or
/// hybrid outer loop). Unused loops are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub strategy: Strategy,
    pub fixed_txp_dbm: f64,
    /// Starting setpoint of the closed-loop strategies.
    pub initial_txp_dbm: f64,
    /// RSSI target of the RSSI strategy and initial target of the hybrid.
    pub rssi_target_dbm: f64,
    pub throughput_target_kbps: f64,
    /// Range the hybrid outer loop may move the RSSI target within.
    pub rssi_target_range_dbm: [f64; 2],
    pub inner: PidConfig,
    pub outer: PidConfig,
}

impl ControllerSpec {
    /// Standalone loops: RSSI at 100 Hz with kp 0.2, ki 0.01; throughput at
    /// 1 Hz with kp 0.009, kd 0.0001. The hybrid cascade uses kp 0.009,
    /// kd 0.0001 on its RSSI loop and kp 0.1, kd 0.01 on its throughput loop.
    pub fn for_strategy(strategy: Strategy) -> Self {
        let (inner, outer) = match strategy {
            Strategy::Hybrid => (
                PidConfig::new(0.009, 0.0, 0.0001, 100.0),
                PidConfig::new(0.1, 0.0, 0.01, 1.0),
            ),
            _ => (
                PidConfig::new(0.2, 0.01, 0.0, 100.0),
                PidConfig::new(0.009, 0.0, 0.0001, 1.0),
            ),
        };
        ControllerSpec {
            strategy,
            fixed_txp_dbm: 20.0,
            initial_txp_dbm: 0.0,
            rssi_target_dbm: -60.0,
            throughput_target_kbps: 800.0,
            rssi_target_range_dbm: [-90.0, -20.0],
            inner,
            outer,
        }
    }

    pub fn fixed(txp_dbm: f64) -> Self {
        ControllerSpec {
            fixed_txp_dbm: txp_dbm,
            ..ControllerSpec::for_strategy(Strategy::Fixed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("controller.fixed_txp_dbm", self.fixed_txp_dbm),
            ("controller.initial_txp_dbm", self.initial_txp_dbm),
            ("controller.rssi_target_dbm", self.rssi_target_dbm),
            ("controller.throughput_target_kbps", self.throughput_target_kbps),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        let [lo, hi] = self.rssi_target_range_dbm;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid(
                "controller.rssi_target_range_dbm",
                "must be an ordered pair",
            ));
        }
        match self.strategy {
            Strategy::Fixed => Ok(()),
            Strategy::Rssi => self.inner.validate("controller.inner"),
            Strategy::Throughput => self.outer.validate("controller.outer"),
            Strategy::Hybrid => {
                self.inner.validate("controller.inner")?;
                self.outer.validate("controller.outer")?;
                if self.inner.update_hz < self.outer.update_hz {
                    return Err(Error::invalid(
                        "controller.inner.update_hz",
                        "the RSSI loop must run at least as fast as the throughput loop",
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Result of a controller tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxpDecision {
    /// Continuous setpoint after the increment, clamped to the table range.
    pub setpoint_dbm: f64,
    /// Quantized command for the actuator.
    pub commanded_dbm: f64,
}

fn apply_increment(table: &TxPowerTable, current_dbm: f64, increment: f64) -> TxpDecision {
    let setpoint = (current_dbm + increment).clamp(table.min_dbm(), table.max_dbm());
    TxpDecision {
        setpoint_dbm: setpoint,
        commanded_dbm: table.quantize(setpoint),
    }
}

/// RSSI loop: error in dB drives the power setpoint.
pub fn rssi_controller_tick(
    cfg: &PidConfig,
    state: &mut PidState,
    target_dbm: f64,
    measured_rssi_dbm: f64,
    current_txp_dbm: f64,
    table: &TxPowerTable,
) -> TxpDecision {
    let out = pid_step(cfg, state, target_dbm - measured_rssi_dbm, cfg.period_s());
    apply_increment(table, current_txp_dbm, out.increment)
}

/// Throughput loop: error in kbps drives the power setpoint.
pub fn throughput_controller_tick(
    cfg: &PidConfig,
    state: &mut PidState,
    target_kbps: f64,
    measured_kbps: f64,
    current_txp_dbm: f64,
    table: &TxPowerTable,
) -> TxpDecision {
    let out = pid_step(cfg, state, target_kbps - measured_kbps, cfg.period_s());
    apply_increment(table, current_txp_dbm, out.increment)
}

/// Hybrid outer loop: moves the RSSI target by a bounded step.
pub fn hybrid_outer_tick(
    spec: &ControllerSpec,
    state: &mut PidState,
    measured_kbps: f64,
    current_rssi_target_dbm: f64,
) -> f64 {
    let out = pid_step(
        &spec.outer,
        state,
        spec.throughput_target_kbps - measured_kbps,
        spec.outer.period_s(),
    );
    let [lo, hi] = spec.rssi_target_range_dbm;
    (current_rssi_target_dbm + out.increment).clamp(lo, hi)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HybridStates {
    pub inner: PidState,
    pub outer: PidState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridDecision {
    pub rssi_target_dbm: f64,
    pub txp: Option<TxpDecision>,
}

/// One hybrid step. When a throughput sample is given the outer loop runs
/// first; when an RSSI sample is given the inner loop then tracks the
/// (possibly updated) target.
pub fn hybrid_tick(
    spec: &ControllerSpec,
    states: &mut HybridStates,
    measured_rssi_dbm: Option<f64>,
    measured_kbps: Option<f64>,
    current_txp_dbm: f64,
    current_rssi_target_dbm: f64,
    table: &TxPowerTable,
) -> HybridDecision {
    let target = match measured_kbps {
        Some(kbps) => hybrid_outer_tick(spec, &mut states.outer, kbps, current_rssi_target_dbm),
        None => current_rssi_target_dbm,
    };
    let txp = measured_rssi_dbm
        .map(|rssi| rssi_controller_tick(&spec.inner, &mut states.inner, target, rssi, current_txp_dbm, table));
    HybridDecision {
        rssi_target_dbm: target,
        txp,
    }
}

pub fn fixed_policy(txp_dbm: f64, table: &TxPowerTable) -> f64 {
    table.quantize(txp_dbm)
}

/// Runtime state of a controller inside a simulation run.
#[derive(Debug, Clone)]
pub struct Controller {
    spec: ControllerSpec,
    setpoint_dbm: f64,
    rssi_target_dbm: f64,
    states: HybridStates,
}

impl Controller {
    pub fn new(spec: ControllerSpec, table: &TxPowerTable) -> Self {
        let start = match spec.strategy {
            Strategy::Fixed => spec.fixed_txp_dbm,
            _ => spec.initial_txp_dbm,
        };
        Controller {
            setpoint_dbm: start.clamp(table.min_dbm(), table.max_dbm()),
            rssi_target_dbm: spec.rssi_target_dbm,
            states: HybridStates::default(),
            spec,
        }
    }

    pub fn spec(&self) -> &ControllerSpec {
        &self.spec
    }

    pub fn initial_command(&self, table: &TxPowerTable) -> f64 {
        table.quantize(self.setpoint_dbm)
    }

    pub fn setpoint_dbm(&self) -> f64 {
        self.setpoint_dbm
    }

    /// RSSI target in force, if the strategy has one.
    pub fn rssi_target_dbm(&self) -> Option<f64> {
        match self.spec.strategy {
            Strategy::Rssi | Strategy::Hybrid => Some(self.rssi_target_dbm),
            _ => None,
        }
    }

    pub fn pid_states(&self) -> &HybridStates {
        &self.states
    }

    /// Runs the RSSI-driven loop, returning the new command.
    pub fn inner_tick(&mut self, measured_rssi_dbm: f64, table: &TxPowerTable) -> Option<f64> {
        match self.spec.strategy {
            Strategy::Rssi | Strategy::Hybrid => {
                let d = rssi_controller_tick(
                    &self.spec.inner,
                    &mut self.states.inner,
                    self.rssi_target_dbm,
                    measured_rssi_dbm,
                    self.setpoint_dbm,
                    table,
                );
                self.setpoint_dbm = d.setpoint_dbm;
                Some(d.commanded_dbm)
            }
            _ => None,
        }
    }

    /// Runs the throughput-driven loop. For the throughput strategy this
    /// returns a new command; for the hybrid it only moves the RSSI target.
    pub fn outer_tick(&mut self, measured_kbps: f64, table: &TxPowerTable) -> Option<f64> {
        match self.spec.strategy {
            Strategy::Throughput => {
                let d = throughput_controller_tick(
                    &self.spec.outer,
                    &mut self.states.outer,
                    self.spec.throughput_target_kbps,
                    measured_kbps,
                    self.setpoint_dbm,
                    table,
                );
                self.setpoint_dbm = d.setpoint_dbm;
                Some(d.commanded_dbm)
            }
            Strategy::Hybrid => {
                self.rssi_target_dbm =
                    hybrid_outer_tick(&self.spec, &mut self.states.outer, measured_kbps, self.rssi_target_dbm);
                None
            }
            _ => None,
        }
    }
}
