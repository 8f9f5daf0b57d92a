//! Peripheral power model and controller overhead.
//!
//! Peripheral power is an idle floor, a per-bit processing cost, and radio
//! power weighted by the fraction of the interval the radio is busy. Radio
//! power is affine in the linear (mW) output power, scaled up while the FEM
//! amplifies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerModel {
    pub p_idle_mw: f64,
    /// Processing energy per delivered bit, uJ.
    pub e_per_bit_uj: f64,
    /// Radio power at negligible output, mW.
    pub radio_base_mw: f64,
    /// Additional radio power per mW of radiated power.
    pub radio_per_output_mw: f64,
    /// Multiplier on radio power while the FEM transmit path is engaged.
    pub fem_multiplier: f64,
    pub overhead: OverheadTables,
}

impl Default for PowerModel {
    /// Fitted to the no-FEM anchors (0.65, 14.15 and 30.31 mW at roughly 2,
    /// 600 and 1300 kbps with 8 dBm output) and to a fivefold increase with
    /// the FEM at 20 dBm.
    fn default() -> Self {
        PowerModel {
            p_idle_mw: 0.606,
            e_per_bit_uj: 0.002,
            radio_base_mw: 22.33,
            radio_per_output_mw: 0.768,
            fem_multiplier: 1.5,
            overhead: OverheadTables::default(),
        }
    }
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("power.p_idle_mw", self.p_idle_mw),
            ("power.e_per_bit_uj", self.e_per_bit_uj),
            ("power.radio_base_mw", self.radio_base_mw),
            ("power.radio_per_output_mw", self.radio_per_output_mw),
            ("power.fem_multiplier", self.fem_multiplier),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.p_idle_mw <= 0.0 {
            return Err(Error::invalid("power.p_idle_mw", "must be positive"));
        }
        if self.e_per_bit_uj < 0.0 || self.radio_base_mw < 0.0 || self.radio_per_output_mw < 0.0 {
            return Err(Error::invalid("power", "energy coefficients must be non-negative"));
        }
        if self.fem_multiplier < 1.0 {
            return Err(Error::invalid("power.fem_multiplier", "must be at least 1"));
        }
        self.overhead.validate()
    }

    /// Radio power while active at the given effective output, mW.
    pub fn radio_power(&self, effective_txp_dbm: f64) -> f64 {
        self.radio_base_mw + self.radio_per_output_mw * 10f64.powf(effective_txp_dbm / 10.0)
    }

    pub fn peripheral_power(
        &self,
        effective_txp_dbm: f64,
        radio_duty: f64,
        delivered_kbps: f64,
        fem_present: bool,
    ) -> f64 {
        let duty = radio_duty.clamp(0.0, 1.0);
        let fem = if fem_present { self.fem_multiplier } else { 1.0 };
        let bps = delivered_kbps.max(0.0) * 1000.0;
        self.p_idle_mw + self.e_per_bit_uj * bps / 1000.0 + self.radio_power(effective_txp_dbm) * duty * fem
    }

    pub fn control_overhead(&self, role: Role, strategy: OverheadStrategy, update_hz: f64) -> f64 {
        self.overhead.table(role, strategy).eval(update_hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Central,
    Peripheral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverheadStrategy {
    Rssi,
    Throughput,
    Hybrid,
}

impl fmt::Display for OverheadStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OverheadStrategy::Rssi => "rssi",
            OverheadStrategy::Throughput => "throughput",
            OverheadStrategy::Hybrid => "hybrid",
        })
    }
}

impl FromStr for OverheadStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rssi" => Ok(OverheadStrategy::Rssi),
            "throughput" => Ok(OverheadStrategy::Throughput),
            "hybrid" => Ok(OverheadStrategy::Hybrid),
            other => Err(Error::invalid("strategy", format!("unknown strategy `{other}`"))),
        }
    }
}

/// Overhead power sampled at a few update frequencies, interpolated
/// linearly in log-frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OverheadCurve {
    /// `(update_hz, mW)` pairs with strictly increasing frequency.
    pub points: Vec<[f64; 2]>,
}

impl OverheadCurve {
    fn new(points: &[[f64; 2]]) -> Self {
        OverheadCurve {
            points: points.to_vec(),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::invalid(name, "needs at least one point"));
        }
        for p in &self.points {
            if !(p[0].is_finite() && p[0] > 0.0 && p[1].is_finite() && p[1] >= 0.0) {
                return Err(Error::invalid(
                    name,
                    "points need positive frequency and non-negative power",
                ));
            }
        }
        for w in self.points.windows(2) {
            if w[1][0] <= w[0][0] {
                return Err(Error::invalid(name, "frequencies must increase"));
            }
            if w[1][1] < w[0][1] {
                return Err(Error::invalid(name, "power must not decrease with frequency"));
            }
        }
        Ok(())
    }

    /// Below the first point the curve is flat; above the last it continues
    /// with the last segment's slope.
    pub fn eval(&self, update_hz: f64) -> f64 {
        let pts = &self.points;
        if pts.len() == 1 || update_hz.is_nan() || update_hz <= pts[0][0] {
            return pts[0][1];
        }
        let x = update_hz.log10();
        let seg = pts
            .windows(2)
            .find(|w| update_hz <= w[1][0])
            .unwrap_or(&pts[pts.len() - 2..]);
        let (x0, y0) = (seg[0][0].log10(), seg[0][1]);
        let (x1, y1) = (seg[1][0].log10(), seg[1][1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// One curve per device role and strategy. Hybrid curves are indexed by
/// the total number of loop updates per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverheadTables {
    pub central_rssi: OverheadCurve,
    pub central_throughput: OverheadCurve,
    pub central_hybrid: OverheadCurve,
    pub peripheral_rssi: OverheadCurve,
    pub peripheral_throughput: OverheadCurve,
    pub peripheral_hybrid: OverheadCurve,
}

impl Default for OverheadTables {
    fn default() -> Self {
        OverheadTables {
            central_rssi: OverheadCurve::new(&[[0.01, 0.30], [1.0, 0.35], [10.0, 0.60], [100.0, 2.00], [1000.0, 8.00]]),
            central_throughput: OverheadCurve::new(&[
                [0.01, 0.30],
                [1.0, 0.40],
                [10.0, 0.90],
                [100.0, 4.00],
                [1000.0, 16.0],
            ]),
            central_hybrid: OverheadCurve::new(&[[0.01, 0.35], [10.0, 0.80], [101.0, 2.39], [1000.0, 10.0]]),
            peripheral_rssi: OverheadCurve::new(&[[0.01, 0.05], [10.0, 0.05], [100.0, 0.18], [1000.0, 0.34]]),
            peripheral_throughput: OverheadCurve::new(&[[0.01, 0.05], [10.0, 0.05], [100.0, 0.18], [1000.0, 0.34]]),
            peripheral_hybrid: OverheadCurve::new(&[[0.01, 0.06], [10.0, 0.06], [101.0, 0.19], [1000.0, 0.35]]),
        }
    }
}

impl OverheadTables {
    pub fn table(&self, role: Role, strategy: OverheadStrategy) -> &OverheadCurve {
        match (role, strategy) {
            (Role::Central, OverheadStrategy::Rssi) => &self.central_rssi,
            (Role::Central, OverheadStrategy::Throughput) => &self.central_throughput,
            (Role::Central, OverheadStrategy::Hybrid) => &self.central_hybrid,
            (Role::Peripheral, OverheadStrategy::Rssi) => &self.peripheral_rssi,
            (Role::Peripheral, OverheadStrategy::Throughput) => &self.peripheral_throughput,
            (Role::Peripheral, OverheadStrategy::Hybrid) => &self.peripheral_hybrid,
        }
    }

    fn validate(&self) -> Result<()> {
        self.central_rssi.validate("power.overhead.central_rssi")?;
        self.central_throughput.validate("power.overhead.central_throughput")?;
        self.central_hybrid.validate("power.overhead.central_hybrid")?;
        self.peripheral_rssi.validate("power.overhead.peripheral_rssi")?;
        self.peripheral_throughput
            .validate("power.overhead.peripheral_throughput")?;
        self.peripheral_hybrid.validate("power.overhead.peripheral_hybrid")
    }
}
