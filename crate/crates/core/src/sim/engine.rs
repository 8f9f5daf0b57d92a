use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{
    distance_at, DisturbanceKind, RunTrace, ScenarioSpec, TraceEvent, TraceSample, EVENT_CONNECT, EVENT_DISCONNECT,
};
use crate::channel::{self, ChannelState, EnvironmentProfile};
use crate::config::ModelConfig;
use crate::control::{Controller, Strategy};
use crate::error::Result;
use crate::measure::{sample_rssi, to_micros, to_seconds, RunningStats, ThroughputEstimator};
use crate::power::{OverheadStrategy, Role};
use crate::radio::{effective_tx_power, run_connection_event, LinkState};
use crate::rng::{self, Stream, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub record_trace: bool,
    /// Extra RSSI sampling clock feeding [`RunOutput::rssi_stats`].
    pub rssi_sample_hz: Option<f64>,
    pub keep_throughput_history: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            record_trace: true,
            rssi_sample_hz: None,
            keep_throughput_history: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: RunTrace,
    /// Samples from the extra RSSI clock.
    pub rssi_stats: RunningStats,
    /// Every finalized throughput window.
    pub throughput_stats: RunningStats,
    pub throughput_history: Option<Vec<f64>>,
    /// Peripheral power of each connection event while connected.
    pub event_power_stats: RunningStats,
}

/// Ordering among sources firing at the same instant. The channel is
/// advanced lazily before any of these run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Source {
    Disturbance,
    Link,
    Measure,
    OuterTick,
    InnerTick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Scheduled {
    t_us: u64,
    source: Source,
    /// Tick index for periodic sources, list index for disturbances.
    index: u64,
}

fn periodic_time_us(k: u64, hz: f64) -> u64 {
    (k as f64 * 1e6 / hz).round() as u64
}

pub fn run_scenario(spec: &ScenarioSpec, model: &ModelConfig) -> Result<RunTrace> {
    Ok(run_scenario_with(spec, model, &RunOptions::default())?.trace)
}

pub fn run_scenario_with(spec: &ScenarioSpec, model: &ModelConfig, opts: &RunOptions) -> Result<RunOutput> {
    model.validate()?;
    spec.validate()?;
    if let Some(hz) = opts.rssi_sample_hz {
        if !(hz.is_finite() && hz > 0.0) {
            return Err(crate::error::Error::invalid("rssi_sample_hz", "must be positive"));
        }
    }
    let mut run = Run::new(spec, model, opts)?;
    run.execute()?;
    Ok(run.finish())
}

struct Run<'a> {
    spec: &'a ScenarioSpec,
    model: &'a ModelConfig,
    opts: &'a RunOptions,
    env: &'a EnvironmentProfile,
    duration_us: u64,
    heap: BinaryHeap<Reverse<Scheduled>>,

    channel: ChannelState,
    channel_step_us: u64,
    next_channel_us: u64,
    event_fade_rng: StreamRng,
    loss_rng: StreamRng,
    latency_rng: StreamRng,

    fem: crate::radio::FemModel,
    link: LinkState,
    controller: Controller,
    last_issued_dbm: f64,
    estimator: ThroughputEstimator,

    last_rssi_dbm: f64,
    last_power_mw: f64,
    peripheral_overhead_mw: f64,
    trace: RunTrace,
    rssi_stats: RunningStats,
    event_power_stats: RunningStats,
}

impl<'a> Run<'a> {
    fn new(spec: &'a ScenarioSpec, model: &'a ModelConfig, opts: &'a RunOptions) -> Result<Self> {
        let env = model.env.get(spec.env);
        let table = &model.table;
        let controller = Controller::new(spec.controller.clone(), table);
        let initial = controller.initial_command(table);
        let link = LinkState::connect(table, initial, &model.link, 0.0)?;
        let mut fem = model.fem.clone();
        fem.set_present(spec.fem_initial);

        let overhead = match spec.controller.strategy {
            Strategy::Fixed => 0.0,
            Strategy::Rssi => model.power.control_overhead(
                Role::Peripheral,
                OverheadStrategy::Rssi,
                spec.controller.inner.update_hz,
            ),
            Strategy::Throughput => model.power.control_overhead(
                Role::Peripheral,
                OverheadStrategy::Throughput,
                spec.controller.outer.update_hz,
            ),
            Strategy::Hybrid => model.power.control_overhead(
                Role::Peripheral,
                OverheadStrategy::Hybrid,
                spec.controller.inner.update_hz + spec.controller.outer.update_hz,
            ),
        };

        let mut estimator = ThroughputEstimator::new(spec.throughput_calc_hz, 0.0);
        if opts.keep_throughput_history {
            estimator = estimator.with_history();
        }
        let channel_step_us = to_micros(model.sim.channel_step_s).max(1);

        let mut run = Run {
            spec,
            model,
            opts,
            env,
            duration_us: to_micros(spec.duration_s),
            heap: BinaryHeap::new(),
            channel: ChannelState::new(env, spec.seed),
            channel_step_us,
            next_channel_us: channel_step_us,
            event_fade_rng: rng::stream(spec.seed, Stream::EventFading),
            loss_rng: rng::stream(spec.seed, Stream::PacketLoss),
            latency_rng: rng::stream(spec.seed, Stream::Latency),
            fem,
            link,
            controller,
            last_issued_dbm: initial,
            estimator,
            last_rssi_dbm: f64::NAN,
            last_power_mw: model.power.p_idle_mw + overhead,
            peripheral_overhead_mw: overhead,
            trace: RunTrace::default(),
            rssi_stats: RunningStats::default(),
            event_power_stats: RunningStats::default(),
        };
        run.seed_schedule();
        Ok(run)
    }

    fn push(&mut self, t_us: u64, source: Source, index: u64) {
        if t_us < self.duration_us {
            self.heap.push(Reverse(Scheduled { t_us, source, index }));
        }
    }

    fn seed_schedule(&mut self) {
        if self.duration_us == 0 {
            return;
        }
        self.trace.events.push(TraceEvent {
            t_s: 0.0,
            label: EVENT_CONNECT.to_string(),
        });
        for (i, d) in self.spec.disturbances.iter().enumerate() {
            self.push(to_micros(d.time_s), Source::Disturbance, i as u64);
        }
        self.push(0, Source::Link, 0);
        if let Some(hz) = self.opts.rssi_sample_hz {
            self.push(periodic_time_us(1, hz), Source::Measure, 1);
        }
        let c = &self.spec.controller;
        match c.strategy {
            Strategy::Fixed => {}
            Strategy::Rssi => self.push(periodic_time_us(1, c.inner.update_hz), Source::InnerTick, 1),
            Strategy::Throughput => self.push(periodic_time_us(1, c.outer.update_hz), Source::OuterTick, 1),
            Strategy::Hybrid => {
                self.push(periodic_time_us(1, c.inner.update_hz), Source::InnerTick, 1);
                self.push(periodic_time_us(1, c.outer.update_hz), Source::OuterTick, 1);
            }
        }
    }

    fn execute(&mut self) -> Result<()> {
        let mut row_pending: Option<u64> = None;
        while let Some(Reverse(ev)) = self.heap.pop() {
            if let Some(t) = row_pending {
                if t != ev.t_us {
                    self.emit_row(t);
                    row_pending = None;
                }
            }
            self.advance_channel(ev.t_us);
            let now_s = to_seconds(ev.t_us);
            self.link.advance_commands(now_s);
            let wants_row = match ev.source {
                Source::Disturbance => {
                    self.disturb(ev.index as usize, now_s);
                    false
                }
                Source::Link => {
                    self.connection_event(ev.t_us);
                    let next = ev.index + 1;
                    let t = to_micros(next as f64 * self.model.link.conn_interval_s);
                    self.push(t, Source::Link, next);
                    true
                }
                Source::Measure => {
                    if let Some(r) = self.sample_at(ev.t_us) {
                        self.rssi_stats.push(r);
                    }
                    let hz = self.opts.rssi_sample_hz.unwrap_or(1.0);
                    self.push(periodic_time_us(ev.index + 1, hz), Source::Measure, ev.index + 1);
                    false
                }
                Source::OuterTick => {
                    self.outer_tick(ev.t_us)?;
                    let hz = self.spec.controller.outer.update_hz;
                    self.push(periodic_time_us(ev.index + 1, hz), Source::OuterTick, ev.index + 1);
                    true
                }
                Source::InnerTick => {
                    self.inner_tick(ev.t_us)?;
                    let hz = self.spec.controller.inner.update_hz;
                    self.push(periodic_time_us(ev.index + 1, hz), Source::InnerTick, ev.index + 1);
                    true
                }
            };
            if wants_row && self.opts.record_trace {
                row_pending = Some(ev.t_us);
            }
        }
        if let Some(t) = row_pending {
            self.emit_row(t);
        }
        // Account for every window completed within the run.
        self.estimator.advance_to(self.duration_us);
        Ok(())
    }

    fn finish(self) -> RunOutput {
        RunOutput {
            trace: self.trace,
            rssi_stats: self.rssi_stats,
            throughput_stats: self.estimator.stats().clone(),
            throughput_history: self.estimator.history().map(<[f64]>::to_vec),
            event_power_stats: self.event_power_stats,
        }
    }

    fn advance_channel(&mut self, t_us: u64) {
        let dt = to_seconds(self.channel_step_us);
        while self.next_channel_us <= t_us {
            channel::step_channel(self.env, &mut self.channel, dt);
            self.next_channel_us += self.channel_step_us;
        }
    }

    fn distance(&self, t_us: u64) -> f64 {
        distance_at(&self.spec.motion, to_seconds(t_us))
    }

    fn disturb(&mut self, index: usize, now_s: f64) {
        let d = self.spec.disturbances[index];
        match d.kind {
            DisturbanceKind::FemRemove => {
                self.fem.rx_present = false;
                if self.spec.fem_remove_tx {
                    self.fem.tx_present = false;
                }
            }
            DisturbanceKind::FemRestore => self.fem.set_present(true),
            DisturbanceKind::StepAtten { db } => self.channel.attenuation_db += db,
        }
        self.trace.events.push(TraceEvent {
            t_s: now_s,
            label: d.kind.label(),
        });
    }

    fn connection_event(&mut self, t_us: u64) {
        let now_s = to_seconds(t_us);
        if !self.link.connected {
            return;
        }
        let txp = effective_tx_power(self.link.commanded_txp_dbm, &self.fem);
        let d = self.distance(t_us);
        let fade: f64 = if self.env.fade_sigma_db > 0.0 {
            self.env.fade_sigma_db * self.event_fade_rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        let rssi = channel::mean_rssi(self.env, &self.channel, txp, self.fem.rx_gain(), d) + fade;
        let params = &self.model.link;
        let result = run_connection_event(params, self.env, rssi, &mut self.loss_rng);
        self.estimator.record_burst(
            t_us,
            to_micros(params.pkt_cycle_s),
            u64::from(result.delivered_packets),
            params.payload_bytes as u64 * 8,
        );
        self.link.update_supervision(&result, now_s, params);
        if self.link.connected {
            self.last_rssi_dbm = rssi;
            let p = self.model.power.peripheral_power(
                txp,
                result.duty(params),
                result.throughput_kbps(params),
                self.fem.tx_present,
            ) + self.peripheral_overhead_mw;
            self.last_power_mw = p;
            self.event_power_stats.push(p);
        } else {
            self.on_disconnect(now_s);
        }
    }

    fn on_disconnect(&mut self, now_s: f64) {
        self.last_rssi_dbm = f64::NAN;
        self.last_power_mw = self.model.power.p_idle_mw;
        self.trace.events.push(TraceEvent {
            t_s: now_s,
            label: EVENT_DISCONNECT.to_string(),
        });
    }

    fn issue(&mut self, commanded: Option<f64>, t_us: u64) -> Result<()> {
        let Some(c) = commanded else { return Ok(()) };
        if c == self.last_issued_dbm {
            return Ok(());
        }
        let latency = self.model.link.sample_latency(&mut self.latency_rng);
        self.link
            .apply_txp_command(&self.model.table, c, to_seconds(t_us), latency)?;
        self.last_issued_dbm = c;
        Ok(())
    }

    fn outer_tick(&mut self, t_us: u64) -> Result<()> {
        if !self.link.connected {
            return Ok(());
        }
        let Some(kbps) = self.estimator.read_estimate(to_seconds(t_us)) else {
            return Ok(());
        };
        let cmd = self.controller.outer_tick(kbps, &self.model.table);
        self.issue(cmd, t_us)
    }

    fn inner_tick(&mut self, t_us: u64) -> Result<()> {
        let Some(rssi) = self.sample_at(t_us) else {
            return Ok(());
        };
        self.last_rssi_dbm = rssi;
        let cmd = self.controller.inner_tick(rssi, &self.model.table);
        self.issue(cmd, t_us)
    }

    fn sample_at(&mut self, t_us: u64) -> Option<f64> {
        let d = self.distance(t_us);
        sample_rssi(&self.link, self.env, &mut self.channel, &self.fem, d)
    }

    fn emit_row(&mut self, t_us: u64) {
        let now_s = to_seconds(t_us);
        let throughput = self.estimator.read_estimate(now_s).unwrap_or(f64::NAN);
        let connected = self.link.connected;
        self.trace.samples.push(TraceSample {
            t_s: now_s,
            distance_m: self.distance(t_us),
            rssi_dbm: if connected { self.last_rssi_dbm } else { f64::NAN },
            throughput_kbps: throughput,
            txp_dbm: self.link.commanded_txp_dbm,
            rssi_target_dbm: self.controller.rssi_target_dbm().unwrap_or(f64::NAN),
            power_mw: if connected {
                self.last_power_mw
            } else {
                self.model.power.p_idle_mw
            },
            connected,
        });
    }
}
