//! Propagation and packet-error model.
//!
//! RSSI is built in dB from four additive parts: the commanded power, the
//! receive gain, a log-distance path loss, and two noise terms. Shadowing is
//! a slow Gauss-Markov process; fading is drawn fresh for every sample.
//!
//! Packet errors follow a logistic curve in RSSI. Combined with the
//! first-failure connection-event rule in [`crate::radio`], this yields the
//! sigmoid-like throughput-versus-RSSI curves of each environment.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::LinkParams;
use crate::rng::{self, Stream, StreamRng};

/// Path loss reference distance in meters. Shorter distances clamp to it.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    Rooftop,
    Corridor,
    Lab,
}

impl Environment {
    pub const ALL: [Environment; 3] = [Environment::Rooftop, Environment::Corridor, Environment::Lab];

    pub fn as_str(self) -> &'static str {
        match self {
            Environment::Rooftop => "rooftop",
            Environment::Corridor => "corridor",
            Environment::Lab => "lab",
        }
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Environment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rooftop" => Ok(Environment::Rooftop),
            "corridor" => Ok(Environment::Corridor),
            "lab" => Ok(Environment::Lab),
            other => Err(Error::invalid("env", format!("unknown environment `{other}`"))),
        }
    }
}

/// Channel parameters of one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentProfile {
    pub name: Environment,
    /// Path loss at the reference distance, dB.
    pub pl0_db: f64,
    /// Log-distance path loss exponent.
    pub exponent: f64,
    /// Stationary standard deviation of the shadowing process, dB.
    pub shadow_sigma_db: f64,
    /// Autocorrelation of the shadowing process at a lag of one second.
    pub shadow_corr: f64,
    /// Standard deviation of the per-sample fast fading, dB.
    pub fade_sigma_db: f64,
    /// RSSI at which half of the packets fail, dBm.
    pub per_r50_dbm: f64,
    /// Logistic width of the packet error curve, dB.
    pub per_slope_db: f64,
}

impl EnvironmentProfile {
    /// Calibrated defaults. See `tests/calibration.rs` for the targets they
    /// are fitted against.
    pub fn default_for(name: Environment) -> Self {
        match name {
            Environment::Rooftop => EnvironmentProfile {
                name,
                pl0_db: 51.0,
                exponent: 2.0,
                shadow_sigma_db: 3.0,
                shadow_corr: 0.9,
                fade_sigma_db: 1.0,
                per_r50_dbm: -77.8,
                per_slope_db: 2.5,
            },
            Environment::Corridor => EnvironmentProfile {
                name,
                pl0_db: 50.0,
                exponent: 2.0,
                shadow_sigma_db: 3.0,
                shadow_corr: 0.9,
                fade_sigma_db: 1.0,
                per_r50_dbm: -77.0,
                per_slope_db: 3.5,
            },
            Environment::Lab => EnvironmentProfile {
                name,
                pl0_db: 52.0,
                exponent: 2.0,
                shadow_sigma_db: 4.8,
                shadow_corr: 0.9,
                fade_sigma_db: 1.0,
                per_r50_dbm: -76.6,
                per_slope_db: 3.85,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let field = |f: &str| format!("{}.{f}", self.name);
        let finite = [
            ("pl0_db", self.pl0_db),
            ("exponent", self.exponent),
            ("shadow_sigma_db", self.shadow_sigma_db),
            ("shadow_corr", self.shadow_corr),
            ("fade_sigma_db", self.fade_sigma_db),
            ("per_r50_dbm", self.per_r50_dbm),
            ("per_slope_db", self.per_slope_db),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::invalid(field(name), "must be finite"));
            }
        }
        if self.exponent < 2.0 {
            return Err(Error::invalid(field("exponent"), "must be at least 2 (free space)"));
        }
        if self.shadow_sigma_db < 0.0 {
            return Err(Error::invalid(field("shadow_sigma_db"), "must be non-negative"));
        }
        if self.fade_sigma_db < 0.0 {
            return Err(Error::invalid(field("fade_sigma_db"), "must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.shadow_corr) {
            return Err(Error::invalid(field("shadow_corr"), "must lie in [0, 1)"));
        }
        if self.per_slope_db <= 0.0 {
            return Err(Error::invalid(field("per_slope_db"), "must be positive"));
        }
        Ok(())
    }

    /// Total RSSI standard deviation at a fixed geometry.
    pub fn rssi_sigma_db(&self) -> f64 {
        self.shadow_sigma_db.hypot(self.fade_sigma_db)
    }
}

/// Stochastic state of one channel realization.
///
/// Shadowing and fading draw from separate streams. Cloning the state
/// clones both streams, which is how callers evaluate two transmit powers
/// under the same noise.
#[derive(Debug, Clone)]
pub struct ChannelState {
    pub shadow_db: f64,
    /// Extra attenuation applied by scripted disturbances, dB.
    pub attenuation_db: f64,
    shadow_rng: StreamRng,
    fade_rng: StreamRng,
}

impl ChannelState {
    /// Starts the shadowing process in its stationary distribution.
    pub fn new(env: &EnvironmentProfile, seed: u64) -> Self {
        let mut shadow_rng = rng::stream(seed, Stream::Shadowing);
        let z: f64 = shadow_rng.sample(StandardNormal);
        ChannelState {
            shadow_db: env.shadow_sigma_db * z,
            attenuation_db: 0.0,
            shadow_rng,
            fade_rng: rng::stream(seed, Stream::Fading),
        }
    }

    /// A state with the shadowing sample pinned to zero.
    pub fn quiet(seed: u64) -> Self {
        ChannelState {
            shadow_db: 0.0,
            attenuation_db: 0.0,
            shadow_rng: rng::stream(seed, Stream::Shadowing),
            fade_rng: rng::stream(seed, Stream::Fading),
        }
    }

    pub fn draw_fade(&mut self, env: &EnvironmentProfile) -> f64 {
        if env.fade_sigma_db == 0.0 {
            return 0.0;
        }
        let z: f64 = self.fade_rng.sample(StandardNormal);
        env.fade_sigma_db * z
    }
}

/// Log-distance path loss in dB.
pub fn path_loss(env: &EnvironmentProfile, distance_m: f64) -> f64 {
    let d = distance_m.max(REFERENCE_DISTANCE_M);
    env.pl0_db + 10.0 * env.exponent * (d / REFERENCE_DISTANCE_M).log10()
}

/// Advances the shadowing process by `dt` seconds.
///
/// Exact discretization of a stationary Gauss-Markov process, so the
/// statistics do not depend on how often it is stepped.
pub fn step_channel(env: &EnvironmentProfile, state: &mut ChannelState, dt: f64) {
    debug_assert!(dt > 0.0);
    let rho = env.shadow_corr.powf(dt);
    let innovation_sigma = env.shadow_sigma_db * (1.0 - rho * rho).max(0.0).sqrt();
    let z: f64 = state.shadow_rng.sample(StandardNormal);
    state.shadow_db = rho * state.shadow_db + innovation_sigma * z;
}

/// RSSI without the fast-fading term.
pub fn mean_rssi(
    env: &EnvironmentProfile,
    state: &ChannelState,
    effective_txp_dbm: f64,
    rx_gain_db: f64,
    distance_m: f64,
) -> f64 {
    effective_txp_dbm + rx_gain_db - path_loss(env, distance_m) - state.attenuation_db + state.shadow_db
}

/// One RSSI sample: [`mean_rssi`] plus a fresh fading draw.
pub fn rssi(
    env: &EnvironmentProfile,
    state: &mut ChannelState,
    effective_txp_dbm: f64,
    rx_gain_db: f64,
    distance_m: f64,
) -> f64 {
    mean_rssi(env, state, effective_txp_dbm, rx_gain_db, distance_m) + state.draw_fade(env)
}

/// Logistic packet error probability; 1/2 at `per_r50_dbm`.
pub fn per(env: &EnvironmentProfile, rssi_dbm: f64) -> f64 {
    if rssi_dbm.is_nan() {
        return 1.0;
    }
    let x = (rssi_dbm - env.per_r50_dbm) / env.per_slope_db;
    // exp overflows to inf for large x, which correctly yields 0.
    1.0 / (1.0 + x.exp())
}

/// Mean packets delivered per connection event at packet error rate `p`.
///
/// Packets go out back-to-back until the first failure or the event cap
/// `n`, so the delivered count is `min(G, n)` with `G` geometric:
/// `E = q (1 - q^n) / (1 - q)` with `q = 1 - p`.
pub fn expected_packets_per_event(p: f64, n: u32) -> f64 {
    let p = p.clamp(0.0, 1.0);
    if p == 0.0 {
        return f64::from(n);
    }
    let q = 1.0 - p;
    q * (1.0 - q.powi(n as i32)) / p
}

/// Closed-form mean goodput in kbps at a given RSSI.
pub fn expected_throughput(env: &EnvironmentProfile, rssi_dbm: f64, link: &LinkParams) -> f64 {
    let p = link.packet_error(env, rssi_dbm);
    let packets = expected_packets_per_event(p, link.max_pkts_per_event);
    packets * link.packet_bits() / link.conn_interval_s / 1000.0
}
