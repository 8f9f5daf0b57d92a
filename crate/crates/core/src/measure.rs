//! Feedback signals: RSSI samples and tumbling-window throughput estimates.

use std::collections::VecDeque;

use crate::channel::{self, ChannelState, EnvironmentProfile};
use crate::radio::{effective_tx_power, FemModel, LinkState};

/// Simulation clock unit.
pub const MICROS_PER_S: u64 = 1_000_000;

pub fn to_micros(t_s: f64) -> u64 {
    (t_s * MICROS_PER_S as f64).round().max(0.0) as u64
}

pub fn to_seconds(t_us: u64) -> f64 {
    t_us as f64 / MICROS_PER_S as f64
}

/// Streaming mean and population variance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    pub fn std(&self) -> Option<f64> {
        (self.count > 0).then(|| (self.m2 / self.count as f64).max(0.0).sqrt())
    }
}

/// One RSSI reading at the central. `None` while the link is down.
pub fn sample_rssi(
    link: &LinkState,
    env: &EnvironmentProfile,
    channel_state: &mut ChannelState,
    fem: &FemModel,
    distance_m: f64,
) -> Option<f64> {
    if !link.connected {
        return None;
    }
    let txp = effective_tx_power(link.commanded_txp_dbm, fem);
    Some(channel::rssi(env, channel_state, txp, fem.rx_gain(), distance_m))
}

/// Packets delivered back-to-back from `start_us`, one every `spacing_us`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Burst {
    start_us: u64,
    spacing_us: u64,
    count: u64,
    bits_per_packet: u64,
}

impl Burst {
    fn time_of(&self, k: u64) -> u64 {
        self.start_us + k * self.spacing_us
    }

    /// Packets landing in `[lo, hi)`.
    fn packets_in(&self, lo: u64, hi: u64) -> u64 {
        let first = self.index_at_or_after(lo);
        let end = self.index_at_or_after(hi);
        end - first
    }

    fn index_at_or_after(&self, t: u64) -> u64 {
        if t <= self.start_us {
            return 0;
        }
        if self.spacing_us == 0 {
            return self.count;
        }
        (t - self.start_us).div_ceil(self.spacing_us).min(self.count)
    }

    fn end_us(&self) -> u64 {
        if self.count == 0 {
            self.start_us
        } else {
            self.time_of(self.count - 1)
        }
    }
}

/// Receiver-side goodput estimate over tumbling windows.
///
/// Each window's estimate is its delivered bits divided by its length and
/// is held until the next window closes.
#[derive(Debug, Clone)]
pub struct ThroughputEstimator {
    window_us: u64,
    window_start_us: u64,
    last_estimate_kbps: Option<f64>,
    pending: VecDeque<Burst>,
    stats: RunningStats,
    closed_bits: u64,
    history: Option<Vec<f64>>,
}

impl ThroughputEstimator {
    /// `calc_hz` sets the window length to `1 / calc_hz`.
    pub fn new(calc_hz: f64, start_s: f64) -> Self {
        let window_us = ((MICROS_PER_S as f64 / calc_hz).round() as u64).max(1);
        ThroughputEstimator {
            window_us,
            window_start_us: to_micros(start_s),
            last_estimate_kbps: None,
            pending: VecDeque::new(),
            stats: RunningStats::default(),
            closed_bits: 0,
            history: None,
        }
    }

    /// Keeps every finalized estimate.
    pub fn with_history(mut self) -> Self {
        self.history = Some(Vec::new());
        self
    }

    pub fn window_s(&self) -> f64 {
        to_seconds(self.window_us)
    }

    pub fn window_us(&self) -> u64 {
        self.window_us
    }

    pub fn window_start_s(&self) -> f64 {
        to_seconds(self.window_start_us)
    }

    /// Bits recorded so far that land in the open window.
    pub fn bits_in_window(&self) -> u64 {
        let lo = self.window_start_us;
        let hi = lo + self.window_us;
        self.pending
            .iter()
            .map(|b| b.packets_in(lo, hi) * b.bits_per_packet)
            .sum()
    }

    /// Bits delivered at a single instant.
    pub fn record_delivery(&mut self, bits: u64, now_s: f64) {
        self.record_burst(to_micros(now_s), 0, 1, bits);
    }

    /// Records `count` packets sent back-to-back from `start_us`. Packets
    /// count toward the window in which they land.
    pub fn record_burst(&mut self, start_us: u64, spacing_us: u64, count: u64, bits_per_packet: u64) {
        if count == 0 || bits_per_packet == 0 {
            return;
        }
        debug_assert!(start_us >= self.window_start_us);
        self.pending.push_back(Burst {
            start_us: start_us.max(self.window_start_us),
            spacing_us,
            count,
            bits_per_packet,
        });
    }

    /// Closes every window that ends at or before `now_us`. Returns the
    /// number of windows closed.
    pub fn advance_to(&mut self, now_us: u64) -> u64 {
        let mut closed = 0;
        while self.window_start_us + self.window_us <= now_us {
            let end = self.window_start_us + self.window_us;
            if self.pending.is_empty() {
                // Nothing pending: every remaining whole window is empty.
                let n = (now_us - self.window_start_us) / self.window_us;
                for _ in 0..n {
                    self.finalize(0);
                }
                self.window_start_us += n * self.window_us;
                closed += n;
                continue;
            }
            let lo = self.window_start_us;
            let bits: u64 = self
                .pending
                .iter()
                .map(|b| b.packets_in(lo, end) * b.bits_per_packet)
                .sum();
            while self.pending.front().is_some_and(|b| b.end_us() < end) {
                self.pending.pop_front();
            }
            self.finalize(bits);
            self.window_start_us = end;
            closed += 1;
        }
        closed
    }

    fn finalize(&mut self, bits: u64) {
        let kbps = bits as f64 / self.window_s() / 1000.0;
        self.closed_bits += bits;
        self.last_estimate_kbps = Some(kbps);
        self.stats.push(kbps);
        if let Some(h) = self.history.as_mut() {
            h.push(kbps);
        }
    }

    /// Most recent finalized estimate after closing due windows. `None`
    /// until the first window closes.
    pub fn read_estimate(&mut self, now_s: f64) -> Option<f64> {
        self.advance_to(to_micros(now_s));
        self.last_estimate_kbps
    }

    pub fn last_estimate_kbps(&self) -> Option<f64> {
        self.last_estimate_kbps
    }

    pub fn stats(&self) -> &RunningStats {
        &self.stats
    }

    pub fn history(&self) -> Option<&[f64]> {
        self.history.as_deref()
    }

    /// Bits accounted to finalized windows.
    pub fn closed_bits(&self) -> u64 {
        self.closed_bits
    }
}
