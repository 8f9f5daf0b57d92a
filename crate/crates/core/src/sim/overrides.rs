//! Partial scenario settings shared by config files and command-line flags.

use serde::{Deserialize, Serialize};

use super::{Motion, ScenarioSpec};
use crate::channel::Environment;
use crate::control::{ControllerSpec, PidConfig, Strategy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ki: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub update_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp: Option<f64>,
}

impl LoopOverrides {
    fn apply(&self, cfg: &mut PidConfig) {
        if let Some(v) = self.kp {
            cfg.kp = v;
        }
        if let Some(v) = self.ki {
            cfg.ki = v;
        }
        if let Some(v) = self.kd {
            cfg.kd = v;
        }
        if let Some(v) = self.update_hz {
            cfg.update_hz = v;
        }
        if let Some(v) = self.clamp {
            cfg.output_clamp = v;
            cfg.integral_clamp = cfg.integral_clamp.max(v);
        }
    }

    fn values(&self) -> [Option<f64>; 5] {
        [self.kp, self.ki, self.kd, self.update_hz, self.clamp]
    }
}

/// Settings layered onto a preset. Unset fields leave the preset alone.
///
/// `kp`/`ki`/`kd`/`update_hz` target the strategy's primary loop: the RSSI
/// loop for `rssi` and `hybrid`, the throughput loop for `throughput`.
/// `inner`/`outer` address a loop explicitly and win over the primary-loop
/// keys. `clamp` sets the output limit of both loops.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub env: Option<Environment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_rssi_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_kbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_txp_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_txp_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ki: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub update_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp: Option<f64>,
    pub inner: LoopOverrides,
    pub outer: LoopOverrides,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub motion: Option<Motion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub throughput_calc_hz: Option<f64>,
}

impl ScenarioOverrides {
    /// Layers `other` on top of `self`; fields set in `other` win.
    pub fn merged(&self, other: &ScenarioOverrides) -> ScenarioOverrides {
        fn pick<T: Clone>(a: &Option<T>, b: &Option<T>) -> Option<T> {
            b.clone().or_else(|| a.clone())
        }
        fn pick_loop(a: &LoopOverrides, b: &LoopOverrides) -> LoopOverrides {
            LoopOverrides {
                kp: pick(&a.kp, &b.kp),
                ki: pick(&a.ki, &b.ki),
                kd: pick(&a.kd, &b.kd),
                update_hz: pick(&a.update_hz, &b.update_hz),
                clamp: pick(&a.clamp, &b.clamp),
            }
        }
        ScenarioOverrides {
            env: pick(&self.env, &other.env),
            strategy: pick(&self.strategy, &other.strategy),
            target_rssi_dbm: pick(&self.target_rssi_dbm, &other.target_rssi_dbm),
            target_kbps: pick(&self.target_kbps, &other.target_kbps),
            fixed_txp_dbm: pick(&self.fixed_txp_dbm, &other.fixed_txp_dbm),
            initial_txp_dbm: pick(&self.initial_txp_dbm, &other.initial_txp_dbm),
            kp: pick(&self.kp, &other.kp),
            ki: pick(&self.ki, &other.ki),
            kd: pick(&self.kd, &other.kd),
            update_hz: pick(&self.update_hz, &other.update_hz),
            clamp: pick(&self.clamp, &other.clamp),
            inner: pick_loop(&self.inner, &other.inner),
            outer: pick_loop(&self.outer, &other.outer),
            duration_s: pick(&self.duration_s, &other.duration_s),
            motion: pick(&self.motion, &other.motion),
            seed: pick(&self.seed, &other.seed),
            throughput_calc_hz: pick(&self.throughput_calc_hz, &other.throughput_calc_hz),
        }
    }

    /// Rejects non-finite numbers early; range checks happen on the
    /// resulting scenario.
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("target_rssi_dbm", self.target_rssi_dbm),
            ("target_kbps", self.target_kbps),
            ("fixed_txp_dbm", self.fixed_txp_dbm),
            ("initial_txp_dbm", self.initial_txp_dbm),
            ("kp", self.kp),
            ("ki", self.ki),
            ("kd", self.kd),
            ("update_hz", self.update_hz),
            ("clamp", self.clamp),
            ("duration_s", self.duration_s),
            ("throughput_calc_hz", self.throughput_calc_hz),
        ];
        let loops = self
            .inner
            .values()
            .into_iter()
            .map(|v| ("inner", v))
            .chain(self.outer.values().into_iter().map(|v| ("outer", v)));
        for (name, v) in scalars.into_iter().chain(loops) {
            if v.is_some_and(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("scenario.{name}"), "must be finite"));
            }
        }
        Ok(())
    }

    pub fn apply(&self, spec: &mut ScenarioSpec) -> Result<()> {
        self.validate()?;
        if let Some(env) = self.env {
            spec.env = env;
        }
        if let Some(strategy) = self.strategy {
            if strategy != spec.controller.strategy {
                let old = &spec.controller;
                spec.controller = ControllerSpec {
                    fixed_txp_dbm: old.fixed_txp_dbm,
                    initial_txp_dbm: old.initial_txp_dbm,
                    rssi_target_dbm: old.rssi_target_dbm,
                    throughput_target_kbps: old.throughput_target_kbps,
                    rssi_target_range_dbm: old.rssi_target_range_dbm,
                    ..ControllerSpec::for_strategy(strategy)
                };
            }
        }
        let c = &mut spec.controller;
        if let Some(v) = self.target_rssi_dbm {
            c.rssi_target_dbm = v;
        }
        if let Some(v) = self.target_kbps {
            c.throughput_target_kbps = v;
        }
        if let Some(v) = self.fixed_txp_dbm {
            c.fixed_txp_dbm = v;
        }
        if let Some(v) = self.initial_txp_dbm {
            c.initial_txp_dbm = v;
        }
        let primary = LoopOverrides {
            kp: self.kp,
            ki: self.ki,
            kd: self.kd,
            update_hz: self.update_hz,
            clamp: None,
        };
        match c.strategy {
            Strategy::Rssi | Strategy::Hybrid => primary.apply(&mut c.inner),
            Strategy::Throughput => primary.apply(&mut c.outer),
            Strategy::Fixed => {}
        }
        if let Some(v) = self.clamp {
            let both = LoopOverrides {
                clamp: Some(v),
                ..LoopOverrides::default()
            };
            both.apply(&mut c.inner);
            both.apply(&mut c.outer);
        }
        self.inner.apply(&mut c.inner);
        self.outer.apply(&mut c.outer);
        if let Some(v) = self.duration_s {
            spec.duration_s = v;
        }
        if let Some(m) = self.motion {
            spec.motion = m;
        }
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        if let Some(v) = self.throughput_calc_hz {
            spec.throughput_calc_hz = v;
        }
        spec.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::presets;

    #[test]
    fn primary_loop_targets_follow_strategy() {
        let mut spec = presets::preset("corridor-ramp-throughput").unwrap();
        let o = ScenarioOverrides {
            kp: Some(0.02),
            ..Default::default()
        };
        o.apply(&mut spec).unwrap();
        assert_eq!(spec.controller.outer.kp, 0.02);

        let mut spec = presets::preset("rooftop-ramp-rssi").unwrap();
        o.apply(&mut spec).unwrap();
        assert_eq!(spec.controller.inner.kp, 0.02);
    }

    #[test]
    fn explicit_loop_wins_over_primary() {
        let mut spec = presets::preset("lab-ramp-hybrid").unwrap();
        let o = ScenarioOverrides {
            kp: Some(0.5),
            inner: LoopOverrides {
                kp: Some(0.7),
                ..Default::default()
            },
            ..Default::default()
        };
        o.apply(&mut spec).unwrap();
        assert_eq!(spec.controller.inner.kp, 0.7);
    }

    #[test]
    fn strategy_switch_keeps_targets() {
        let mut spec = presets::preset("lab-femstep-rssi").unwrap();
        let target = spec.controller.rssi_target_dbm;
        let o = ScenarioOverrides {
            strategy: Some(Strategy::Hybrid),
            ..Default::default()
        };
        o.apply(&mut spec).unwrap();
        assert_eq!(spec.controller.strategy, Strategy::Hybrid);
        assert_eq!(spec.controller.rssi_target_dbm, target);
        assert_eq!(spec.controller.inner.kp, 0.009);
    }

    #[test]
    fn later_layer_wins() {
        let file = ScenarioOverrides {
            seed: Some(1),
            target_kbps: Some(500.0),
            ..Default::default()
        };
        let flags = ScenarioOverrides {
            seed: Some(2),
            ..Default::default()
        };
        let m = file.merged(&flags);
        assert_eq!(m.seed, Some(2));
        assert_eq!(m.target_kbps, Some(500.0));
    }

    #[test]
    fn clamp_raises_integral_bound() {
        let mut spec = presets::preset("rooftop-ramp-rssi").unwrap();
        let o = ScenarioOverrides {
            clamp: Some(5.0),
            ..Default::default()
        };
        o.apply(&mut spec).unwrap();
        assert_eq!(spec.controller.inner.output_clamp, 5.0);
        assert!(spec.controller.inner.integral_clamp >= 5.0);
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut spec = presets::preset("rooftop-ramp-rssi").unwrap();
        let o = ScenarioOverrides {
            update_hz: Some(0.0),
            ..Default::default()
        };
        assert!(o.apply(&mut spec).is_err());
        let o = ScenarioOverrides {
            target_kbps: Some(f64::INFINITY),
            ..Default::default()
        };
        assert!(o.validate().is_err());
    }
}
