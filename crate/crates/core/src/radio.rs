//! Transmit-power actuator and BLE connection-event packet engine.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{self, EnvironmentProfile};
use crate::error::{Error, Result};

/// Timing and framing parameters of the connection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkParams {
    /// Receiver floor; below it every packet fails.
    pub sensitivity_dbm: f64,
    pub conn_interval_s: f64,
    pub payload_bytes: u32,
    /// Airtime of one packet including acknowledgment and spacing.
    pub pkt_cycle_s: f64,
    pub max_pkts_per_event: u32,
    pub supervision_timeout_s: f64,
    /// Central-to-peripheral command latency, normal and censored at zero.
    pub latency_mean_s: f64,
    pub latency_std_s: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            sensitivity_dbm: -90.0,
            conn_interval_s: 0.4,
            payload_bytes: 244,
            pkt_cycle_s: 0.0015,
            max_pkts_per_event: 266,
            supervision_timeout_s: 3.2,
            latency_mean_s: 0.00175,
            latency_std_s: 0.00102,
        }
    }
}

impl LinkParams {
    pub fn packet_bits(&self) -> f64 {
        f64::from(self.payload_bytes) * 8.0
    }

    /// Packet error probability including the hard sensitivity floor.
    pub fn packet_error(&self, env: &EnvironmentProfile, rssi_dbm: f64) -> f64 {
        if rssi_dbm.is_nan() || rssi_dbm < self.sensitivity_dbm {
            1.0
        } else {
            channel::per(env, rssi_dbm)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("link.conn_interval_s", self.conn_interval_s),
            ("link.pkt_cycle_s", self.pkt_cycle_s),
            ("link.supervision_timeout_s", self.supervision_timeout_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if !self.sensitivity_dbm.is_finite() {
            return Err(Error::invalid("link.sensitivity_dbm", "must be finite"));
        }
        if self.payload_bytes == 0 {
            return Err(Error::invalid("link.payload_bytes", "must be positive"));
        }
        if self.max_pkts_per_event == 0 {
            return Err(Error::invalid("link.max_pkts_per_event", "must be positive"));
        }
        if f64::from(self.max_pkts_per_event) * self.pkt_cycle_s > self.conn_interval_s + 1e-9 {
            return Err(Error::invalid(
                "link.max_pkts_per_event",
                "packets per event do not fit in one connection interval",
            ));
        }
        if !(self.latency_mean_s.is_finite() && self.latency_mean_s >= 0.0) {
            return Err(Error::invalid("link.latency_mean_s", "must be non-negative"));
        }
        if !(self.latency_std_s.is_finite() && self.latency_std_s >= 0.0) {
            return Err(Error::invalid("link.latency_std_s", "must be non-negative"));
        }
        Ok(())
    }

    /// Draws one command latency in seconds.
    pub fn sample_latency<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.latency_std_s == 0.0 {
            return self.latency_mean_s;
        }
        let z: f64 = rng.sample(StandardNormal);
        (self.latency_mean_s + self.latency_std_s * z).max(0.0)
    }
}

/// Selectable transmit power levels, FEM-referenced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxPowerTable {
    levels_dbm: Vec<f64>,
}

impl Default for TxPowerTable {
    /// The chip's native steps shifted by the 12 dB FEM gain, plus the
    /// measured -36 dBm floor.
    fn default() -> Self {
        let mut levels = vec![-36.0, -34.0, -28.0, -16.0];
        levels.extend((-5..=1).map(|k| f64::from(k) * 2.0));
        levels.extend((3..=20).map(f64::from));
        TxPowerTable { levels_dbm: levels }
    }
}

impl TxPowerTable {
    pub fn new(levels_dbm: Vec<f64>) -> Result<Self> {
        let table = TxPowerTable { levels_dbm };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels_dbm.is_empty() {
            return Err(Error::invalid("table.levels_dbm", "must not be empty"));
        }
        if self.levels_dbm.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("table.levels_dbm", "must be finite"));
        }
        if self.levels_dbm.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("table.levels_dbm", "must be strictly increasing"));
        }
        Ok(())
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels_dbm
    }

    pub fn min_dbm(&self) -> f64 {
        self.levels_dbm[0]
    }

    pub fn max_dbm(&self) -> f64 {
        self.levels_dbm[self.levels_dbm.len() - 1]
    }

    pub fn contains(&self, txp_dbm: f64) -> bool {
        self.levels_dbm.binary_search_by(|l| l.total_cmp(&txp_dbm)).is_ok()
    }

    /// Nearest level to the clamped request. Ties go to the lower level.
    pub fn quantize(&self, requested_dbm: f64) -> f64 {
        if requested_dbm.is_nan() {
            return self.min_dbm();
        }
        let x = requested_dbm.clamp(self.min_dbm(), self.max_dbm());
        let idx = self.levels_dbm.partition_point(|&l| l < x);
        if idx == 0 {
            return self.levels_dbm[0];
        }
        if idx == self.levels_dbm.len() {
            return self.max_dbm();
        }
        let lo = self.levels_dbm[idx - 1];
        let hi = self.levels_dbm[idx];
        if hi - x < x - lo {
            hi
        } else {
            lo
        }
    }

    /// Largest gap between adjacent levels within `[lo, hi]`.
    pub fn max_gap_in(&self, lo: f64, hi: f64) -> f64 {
        self.levels_dbm
            .windows(2)
            .filter(|w| w[1] >= lo && w[0] <= hi)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

/// External front-end module. Transmit and receive paths are tracked
/// separately so a disturbance can remove either one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FemModel {
    pub tx_present: bool,
    pub rx_present: bool,
    pub tx_shift_db: f64,
    pub rx_gain_db: f64,
    /// Highest output of the bare chip.
    pub chip_max_dbm: f64,
}

impl Default for FemModel {
    fn default() -> Self {
        FemModel {
            tx_present: true,
            rx_present: true,
            tx_shift_db: 12.0,
            rx_gain_db: 13.0,
            chip_max_dbm: 8.0,
        }
    }
}

impl FemModel {
    pub fn absent() -> Self {
        FemModel {
            tx_present: false,
            rx_present: false,
            ..FemModel::default()
        }
    }

    pub fn set_present(&mut self, present: bool) {
        self.tx_present = present;
        self.rx_present = present;
    }

    pub fn rx_gain(&self) -> f64 {
        if self.rx_present {
            self.rx_gain_db
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("fem.tx_shift_db", self.tx_shift_db),
            ("fem.rx_gain_db", self.rx_gain_db),
            ("fem.chip_max_dbm", self.chip_max_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        Ok(())
    }
}

/// Radiated power for a commanded (FEM-referenced) level.
pub fn effective_tx_power(commanded_txp_dbm: f64, fem: &FemModel) -> f64 {
    if fem.tx_present {
        commanded_txp_dbm
    } else {
        (commanded_txp_dbm - fem.tx_shift_db).min(fem.chip_max_dbm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingCommand {
    pub apply_time_s: f64,
    pub txp_dbm: f64,
}

/// Connection state owned by one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub connected: bool,
    pub commanded_txp_dbm: f64,
    pub supervision_deadline_s: f64,
    pending: VecDeque<PendingCommand>,
}

impl LinkState {
    /// A fresh connection established at `now`.
    pub fn connect(table: &TxPowerTable, txp_dbm: f64, params: &LinkParams, now: f64) -> Result<Self> {
        if !table.contains(txp_dbm) {
            return Err(Error::OffGridTxp(txp_dbm));
        }
        Ok(LinkState {
            connected: true,
            commanded_txp_dbm: txp_dbm,
            supervision_deadline_s: now + params.supervision_timeout_s,
            pending: VecDeque::new(),
        })
    }

    pub fn pending(&self) -> impl Iterator<Item = &PendingCommand> {
        self.pending.iter()
    }

    /// Queues a transmit power change that lands `latency_s` after issue.
    ///
    /// Commands are delivered in issue order, so a command never lands
    /// before one issued earlier.
    pub fn apply_txp_command(
        &mut self,
        table: &TxPowerTable,
        txp_dbm: f64,
        issue_time_s: f64,
        latency_s: f64,
    ) -> Result<f64> {
        if !table.contains(txp_dbm) {
            return Err(Error::OffGridTxp(txp_dbm));
        }
        let mut apply = issue_time_s + latency_s.max(0.0);
        if let Some(last) = self.pending.back() {
            apply = apply.max(last.apply_time_s);
        }
        self.pending.push_back(PendingCommand {
            apply_time_s: apply,
            txp_dbm,
        });
        Ok(apply)
    }

    /// Applies every queued command due at or before `now`.
    pub fn advance_commands(&mut self, now: f64) {
        while let Some(cmd) = self.pending.front() {
            if cmd.apply_time_s > now {
                break;
            }
            self.commanded_txp_dbm = cmd.txp_dbm;
            self.pending.pop_front();
        }
    }

    /// Drops the link once the supervision deadline has passed.
    pub fn check_supervision(&mut self, now: f64) -> bool {
        // Tolerates rounding when the deadline falls on an event instant.
        if self.connected && now + 1e-9 >= self.supervision_deadline_s {
            self.connected = false;
        }
        self.connected
    }

    /// Refreshes the deadline after a productive event, then checks it.
    pub fn update_supervision(&mut self, result: &EventResult, now: f64, params: &LinkParams) {
        if self.connected && result.delivered_packets > 0 {
            self.supervision_deadline_s = now + params.supervision_timeout_s;
        }
        self.check_supervision(now);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventResult {
    pub delivered_packets: u32,
    pub delivered_bits: u64,
    pub radio_active_s: f64,
    pub first_failure: bool,
}

impl EventResult {
    pub fn idle() -> Self {
        EventResult {
            delivered_packets: 0,
            delivered_bits: 0,
            radio_active_s: 0.0,
            first_failure: false,
        }
    }

    pub fn duty(&self, params: &LinkParams) -> f64 {
        (self.radio_active_s / params.conn_interval_s).clamp(0.0, 1.0)
    }

    pub fn throughput_kbps(&self, params: &LinkParams) -> f64 {
        self.delivered_bits as f64 / params.conn_interval_s / 1000.0
    }
}

/// Number of successes before the first failure, capped at `cap`.
///
/// Inverse-transform draw of the geometric law that back-to-back Bernoulli
/// packets produce; one uniform per event instead of one per packet.
fn successes_before_failure<R: Rng + ?Sized>(p_fail: f64, cap: u32, rng: &mut R) -> (u32, bool) {
    if p_fail <= 0.0 {
        return (cap, false);
    }
    if p_fail >= 1.0 {
        return (0, true);
    }
    let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let g = (u.ln() / (-p_fail).ln_1p()).floor();
    if g >= f64::from(cap) {
        (cap, false)
    } else {
        (g as u32, true)
    }
}

/// Runs one connection event at a fixed RSSI.
///
/// Packets go back-to-back; the first failure ends the event and the lost
/// packet waits for the next one.
pub fn run_connection_event<R: Rng + ?Sized>(
    params: &LinkParams,
    env: &EnvironmentProfile,
    rssi_dbm: f64,
    rng: &mut R,
) -> EventResult {
    let p = params.packet_error(env, rssi_dbm);
    let (delivered, failed) = successes_before_failure(p, params.max_pkts_per_event, rng);
    let cycles = delivered + u32::from(failed);
    EventResult {
        delivered_packets: delivered,
        delivered_bits: u64::from(delivered) * u64::from(params.payload_bytes) * 8,
        radio_active_s: f64::from(cycles) * params.pkt_cycle_s,
        first_failure: failed,
    }
}
