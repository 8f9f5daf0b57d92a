//! Acceptance suite. Prints one PASS/FAIL line per criterion clause.
//!
//! The process exits 0 regardless of the outcome so the workspace test run
//! stays usable; set `ACCEPTANCE_STRICT=1` to turn any FAIL into a non-zero
//! exit.

use std::process::ExitCode;

use ble_txpc::channel::{expected_throughput, Environment, EnvironmentProfile};
use ble_txpc::control::{pid_step, PidConfig, PidState};
use ble_txpc::power::PowerModel;
use ble_txpc::radio::{run_connection_event, LinkParams, TxPowerTable};
use ble_txpc::report::trace_to_csv;
use ble_txpc::rng::{self, Stream};
use ble_txpc::sim::presets::{fixed_baseline, is_sweep, preset, PRESET_NAMES};
use ble_txpc::sim::sweep::{self, CALCFREQ_DEFAULT_HZ, TXP_DEFAULT_DBM};
use ble_txpc::sim::{ScenarioOverrides, TraceSample};
use ble_txpc::{run_scenario, MetricsSummary, ModelConfig, RunTrace, ScenarioSpec, Strategy, SummaryDocument};
use rayon::prelude::*;

const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
const MAJORITY: usize = 8;

#[derive(Default)]
struct Board {
    results: Vec<(String, bool)>,
}

impl Board {
    fn check(&mut self, id: &str, pass: bool, detail: impl AsRef<str>) {
        println!("{} {id}: {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
        self.results.push((id.to_string(), pass));
    }

    fn majority(&mut self, id: &str, hits: usize, detail: impl AsRef<str>) {
        let n = SEEDS.count();
        self.check(id, hits >= MAJORITY, format!("{hits}/{n} seeds; {}", detail.as_ref()));
    }
}

fn with_seed(mut spec: ScenarioSpec, seed: u64) -> ScenarioSpec {
    spec.seed = seed;
    spec
}

fn switch_strategy(spec: &ScenarioSpec, strategy: Strategy) -> ScenarioSpec {
    let mut s = spec.clone();
    ScenarioOverrides {
        strategy: Some(strategy),
        ..Default::default()
    }
    .apply(&mut s)
    .expect("strategy override");
    s
}

struct Run {
    trace: RunTrace,
    metrics: MetricsSummary,
}

fn run(spec: &ScenarioSpec, model: &ModelConfig) -> Run {
    let trace = run_scenario(spec, model).expect("scenario runs");
    let metrics = SummaryDocument::new(spec, &trace).metrics;
    Run { trace, metrics }
}

fn fmt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".into(), |v| format!("{v:.2}"))
}

/// Collects control-trace properties checked under criterion 9.
#[derive(Default)]
struct TraceAudit {
    rows: usize,
    off_grid: usize,
    oversized_steps: usize,
}

impl TraceAudit {
    fn add(&mut self, samples: &[TraceSample], table: &TxPowerTable) {
        for w in samples.windows(2) {
            let (a, b) = (w[0].txp_dbm, w[1].txp_dbm);
            let gap = table.max_gap_in(a.min(b), a.max(b));
            if (b - a).abs() > 2.0 + gap + 1e-9 {
                self.oversized_steps += 1;
            }
        }
        self.rows += samples.len();
        self.off_grid += samples.iter().filter(|s| !table.contains(s.txp_dbm)).count();
    }
}

fn criterion_1(board: &mut Board, model: &ModelConfig) {
    const EVENTS: u32 = 20_000;
    let link = &model.link;
    let mut worst: f64 = 0.0;
    let mut all = true;
    for env in Environment::ALL {
        let profile = model.env.get(env);
        for (i, rssi) in [-40.0, -60.0, -70.0, -80.0].into_iter().enumerate() {
            let mut rng = rng::stream(1000 + i as u64, Stream::PacketLoss);
            let bits: u64 = (0..EVENTS)
                .map(|_| run_connection_event(link, profile, rssi, &mut rng).delivered_bits)
                .sum();
            let engine = bits as f64 / f64::from(EVENTS) / link.conn_interval_s / 1000.0;
            let oracle = expected_throughput(profile, rssi, link);
            let rel = (engine - oracle).abs() / oracle;
            worst = worst.max(rel);
            if rel > 0.10 {
                all = false;
                println!("  {env} @ {rssi} dBm: engine {engine:.2} vs oracle {oracle:.2} kbps");
            }
        }
    }
    board.check(
        "1 engine-oracle",
        all,
        format!("worst relative error {:.2}%", worst * 100.0),
    );
}

fn criterion_2(board: &mut Board, model: &ModelConfig) {
    let base = preset("calcfreq-sweep").unwrap();
    let rows = sweep::calcfreq_sweep(model, &base, &CALCFREQ_DEFAULT_HZ).unwrap();
    let span = |f: &dyn Fn(&sweep::CalcFreqRow) -> f64| {
        let v: Vec<f64> = rows.iter().map(f).collect();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi, v.iter().sum::<f64>() / v.len() as f64)
    };
    let (lo, hi, _) = span(&|r| r.rssi_mean_dbm);
    board.check("2 rssi mean", hi - lo < 1.0, format!("spread {:.3} dB", hi - lo));
    let (lo, hi, avg) = span(&|r| r.rssi_std_db);
    let ok = rows.iter().all(|r| (r.rssi_std_db - avg).abs() <= 0.3 * avg);
    board.check("2 rssi std", ok, format!("{lo:.2}..{hi:.2} dB around {avg:.2}"));
    let (lo, hi, _) = span(&|r| r.throughput_mean_kbps);
    board.check(
        "2 throughput mean",
        (hi - lo) / lo < 0.10,
        format!("{lo:.1}..{hi:.1} kbps"),
    );
    let std_at = |hz: f64| {
        rows.iter()
            .find(|r| r.calc_hz == hz)
            .map(|r| r.throughput_std_kbps)
            .unwrap()
    };
    let (s1, s100, s1000) = (std_at(1.0), std_at(100.0), std_at(1000.0));
    board.check(
        "2 throughput std order",
        s1000 > s100 && s100 > s1,
        format!("1 Hz {s1:.1}, 100 Hz {s100:.1}, 1000 Hz {s1000:.1} kbps"),
    );
}

fn criterion_3(board: &mut Board, model: &ModelConfig) {
    let base = preset("txp-sweep").unwrap();
    let rows = sweep::txp_sweep(model, &base, &Environment::ALL, &TXP_DEFAULT_DBM).unwrap();
    for env in Environment::ALL {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.env == env)
            .map(|r| (r.txp_dbm, r.mean_rssi_dbm))
            .unzip();
        let slope = sweep::regression_slope(&xs, &ys).unwrap_or(f64::NAN);
        board.check(
            &format!("3 slope {env}"),
            (slope - 1.0).abs() <= 0.15,
            format!("{slope:.3} dB/dB"),
        );
    }
}

fn criterion_4(board: &mut Board, model: &ModelConfig, audit: &mut TraceAudit) {
    let runs: Vec<(Run, Run, Run)> = SEEDS
        .into_par_iter()
        .map(|seed| {
            let s = with_seed(preset("rooftop-ramp-rssi").unwrap(), seed);
            (
                run(&s, model),
                run(&fixed_baseline(&s, 20.0), model),
                run(&fixed_baseline(&s, -10.0), model),
            )
        })
        .collect();
    let mut mean_ok = 0;
    let mut std_ok = 0;
    let mut power_ok = 0;
    for (pid, hi, lo) in &runs {
        audit.add(&pid.trace.samples, &model.table);
        let m = &pid.metrics;
        mean_ok += usize::from(m.mean_rssi_dbm.is_some_and(|v| (v + 60.0).abs() <= 2.0));
        std_ok += usize::from(matches!(
            (m.std_rssi_db, hi.metrics.std_rssi_db, lo.metrics.std_rssi_db),
            (Some(p), Some(a), Some(b)) if p < a && p < b
        ));
        power_ok += usize::from(matches!(
            (m.mean_power_mw, hi.metrics.mean_power_mw),
            (Some(p), Some(f)) if p <= 0.5 * f
        ));
    }
    let (pid, hi, lo) = &runs[0];
    board.majority(
        "4 rssi mean",
        mean_ok,
        format!("seed 1 mean {} dBm", fmt(pid.metrics.mean_rssi_dbm)),
    );
    board.majority(
        "4 rssi std",
        std_ok,
        format!(
            "seed 1 pid {} vs fixed 20 {} / fixed -10 {} dB",
            fmt(pid.metrics.std_rssi_db),
            fmt(hi.metrics.std_rssi_db),
            fmt(lo.metrics.std_rssi_db)
        ),
    );
    board.majority(
        "4 power",
        power_ok,
        format!(
            "seed 1 pid {} vs fixed 20 {} mW",
            fmt(pid.metrics.mean_power_mw),
            fmt(hi.metrics.mean_power_mw)
        ),
    );
}

fn criterion_5(board: &mut Board, model: &ModelConfig, audit: &mut TraceAudit) {
    let runs: Vec<(Run, Run)> = SEEDS
        .into_par_iter()
        .map(|seed| {
            let s = with_seed(preset("corridor-ramp-throughput").unwrap(), seed);
            (run(&s, model), run(&fixed_baseline(&s, 20.0), model))
        })
        .collect();
    let mut mean_ok = 0;
    let mut std_ok = 0;
    let mut power_ok = 0;
    let mut means = Vec::new();
    let mut stds = Vec::new();
    for (pid, fixed) in &runs {
        audit.add(&pid.trace.samples, &model.table);
        let m = &pid.metrics;
        means.push(fmt(m.mean_throughput_kbps));
        stds.push(format!(
            "{}/{}",
            fmt(m.std_throughput_kbps),
            fmt(fixed.metrics.std_throughput_kbps)
        ));
        mean_ok += usize::from(m.mean_throughput_kbps.is_some_and(|v| (v - 800.0).abs() <= 40.0));
        std_ok += usize::from(matches!(
            (m.std_throughput_kbps, fixed.metrics.std_throughput_kbps),
            (Some(p), Some(f)) if p < f
        ));
        power_ok += usize::from(matches!(
            (m.mean_power_mw, fixed.metrics.mean_power_mw),
            (Some(p), Some(f)) if p <= 0.5 * f
        ));
    }
    board.majority(
        "5 throughput mean",
        mean_ok,
        format!("means [{}] kbps", means.join(", ")),
    );
    board.majority(
        "5 throughput std",
        std_ok,
        format!("pid/fixed [{}] kbps", stds.join(", ")),
    );
    let (pid, fixed) = &runs[0];
    board.majority(
        "5 power",
        power_ok,
        format!(
            "seed 1 pid {} vs fixed 20 {} mW",
            fmt(pid.metrics.mean_power_mw),
            fmt(fixed.metrics.mean_power_mw)
        ),
    );
}

fn criterion_6(board: &mut Board, model: &ModelConfig, audit: &mut TraceAudit) {
    let runs: Vec<(Run, Run)> = SEEDS
        .into_par_iter()
        .map(|seed| {
            let s = with_seed(preset("lab-ramp-hybrid").unwrap(), seed);
            let t = switch_strategy(&s, Strategy::Throughput);
            (run(&s, model), run(&t, model))
        })
        .collect();
    let mut closer = 0;
    let mut std_ok = 0;
    let mut pairs = Vec::new();
    for (hyb, tput) in &runs {
        audit.add(&hyb.trace.samples, &model.table);
        audit.add(&tput.trace.samples, &model.table);
        let (h, t) = (&hyb.metrics, &tput.metrics);
        pairs.push(format!(
            "{}|{} ({}|{})",
            fmt(h.mean_throughput_kbps),
            fmt(t.mean_throughput_kbps),
            fmt(h.std_throughput_kbps),
            fmt(t.std_throughput_kbps)
        ));
        closer += usize::from(matches!(
            (h.mean_throughput_kbps, t.mean_throughput_kbps),
            (Some(a), Some(b)) if (a - 800.0).abs() < (b - 800.0).abs()
        ));
        std_ok += usize::from(matches!(
            (h.std_throughput_kbps, t.std_throughput_kbps),
            (Some(a), Some(b)) if a < b
        ));
    }
    println!("  hybrid|throughput mean (std): {}", pairs.join(", "));
    board.majority("6 mean closer to target", closer, "paired seeds");
    board.majority("6 throughput std", std_ok, "paired seeds");
}

fn criterion_7(board: &mut Board, model: &ModelConfig, audit: &mut TraceAudit) {
    let family = |name: &str| -> Vec<(ScenarioSpec, Run)> {
        SEEDS
            .into_par_iter()
            .map(|seed| {
                let s = with_seed(preset(name).unwrap(), seed);
                let r = run(&s, model);
                (s, r)
            })
            .collect()
    };
    let step_time = |s: &ScenarioSpec| s.disturbances[0].time_s;

    let rssi = family("lab-femstep-rssi");
    let mut hits = 0;
    let mut times = Vec::new();
    for (_, r) in &rssi {
        audit.add(&r.trace.samples, &model.table);
        times.push(fmt(r.metrics.recovery_time_s));
        hits += usize::from(r.metrics.recovery_time_s.is_some_and(|t| t <= 0.3));
    }
    board.majority("7a rssi recovery", hits, format!("recovery [{}] s", times.join(", ")));

    let tput = family("lab-femstep-throughput");
    let mut hits = 0;
    let mut times = Vec::new();
    for (s, r) in &tput {
        audit.add(&r.trace.samples, &model.table);
        let after = r.metrics.disconnect_time_s.map(|t| t - step_time(s));
        times.push(fmt(after));
        hits += usize::from(after.is_some_and(|d| (2.0..=5.0).contains(&d)));
    }
    board.majority(
        "7b throughput disconnect",
        hits,
        format!("disconnect after step [{}] s", times.join(", ")),
    );

    let hybrid = family("lab-femstep-hybrid");
    let mut hits = 0;
    let mut times = Vec::new();
    for (_, r) in &hybrid {
        audit.add(&r.trace.samples, &model.table);
        let m = &r.metrics;
        times.push(format!(
            "{}{}",
            fmt(m.recovery_time_s),
            if m.disconnect_count > 0 { "!" } else { "" }
        ));
        hits += usize::from(m.disconnect_count == 0 && m.recovery_time_s.is_some_and(|t| t <= 3.0));
    }
    board.majority(
        "7c hybrid holds link and recovers",
        hits,
        format!("recovery [{}] s", times.join(", ")),
    );
}

fn criterion_8(board: &mut Board, model: &ModelConfig) {
    let m: &PowerModel = &model.power;
    let link: &LinkParams = &model.link;
    let full_kbps = f64::from(link.max_pkts_per_event) * link.packet_bits() / link.conn_interval_s / 1000.0;
    let full_duty = f64::from(link.max_pkts_per_event) * link.pkt_cycle_s / link.conn_interval_s;
    let at = |kbps: f64, txp: f64, fem: bool| {
        let duty = (kbps / full_kbps * full_duty).max(link.pkt_cycle_s / link.conn_interval_s);
        m.peripheral_power(txp, duty, kbps, fem)
    };
    let anchors = [(2.0, 0.65), (600.0, 14.15), (full_kbps, 30.31)];
    let got: Vec<f64> = anchors.iter().map(|&(k, _)| at(k, 8.0, false)).collect();
    let ok = anchors
        .iter()
        .zip(&got)
        .all(|(&(_, want), &g)| (g - want).abs() <= 0.2 * want);
    board.check(
        "8 no-fem anchors",
        ok,
        format!("{:.2} / {:.2} / {:.2} mW", got[0], got[1], got[2]),
    );
    let ratio = at(full_kbps, 20.0, true) / at(full_kbps, 8.0, false);
    board.check("8 fem multiplier", (ratio - 5.0).abs() <= 1.5, format!("{ratio:.2}x"));
    let monotone = model.table.levels().windows(2).all(|w| {
        [0.0, 0.1, 0.5, 1.0]
            .iter()
            .all(|&d| m.peripheral_power(w[1], d, 500.0, true) >= m.peripheral_power(w[0], d, 500.0, true))
    });
    board.check("8 power monotone in txp", monotone, "every table level, four duties");
}

fn criterion_9(board: &mut Board, audit: &TraceAudit) {
    let rssi = PidConfig::new(0.2, 0.01, 0.0, 100.0);
    let mut st = PidState::default();
    let a = pid_step(&rssi, &mut st, 1.0, 0.01);
    let b = pid_step(&rssi, &mut st, 0.5, 0.01);
    // Integral accumulates error * dt: 0.2 + 0.01 * 0.01, then 0.1 + 0.01 * 0.015
    let tput = PidConfig::new(0.009, 0.0, 0.0001, 1.0);
    let mut st2 = PidState::default();
    let c = pid_step(&tput, &mut st2, 100.0, 1.0);
    let d = pid_step(&tput, &mut st2, 50.0, 1.0);
    // 0.009 * 100, then 0.009 * 50 + 0.0001 * (50 - 100)
    let close = |x: f64, y: f64| (x - y).abs() < 1e-12;
    let ok = close(a.raw, 0.2001) && close(b.raw, 0.10015) && close(c.raw, 0.9) && close(d.raw, 0.445);
    board.check(
        "9 pid hand examples",
        ok,
        format!("{:.4} {:.4} {:.4} {:.4}", a.raw, b.raw, c.raw, d.raw),
    );

    let mut bounded = true;
    let mut peak: f64 = 0.0;
    for error in [40.0, -40.0, 0.5] {
        let mut st = PidState::default();
        for _ in 0..6000 {
            let out = pid_step(&rssi, &mut st, error, rssi.period_s());
            let term = (rssi.ki * st.integral).abs();
            peak = peak.max(term);
            bounded &= term <= rssi.integral_clamp + 1e-12 && out.increment.abs() <= rssi.output_clamp;
        }
    }
    board.check("9 anti-windup", bounded, format!("peak |ki*I| {peak:.3} over 60 s"));
    board.check(
        "9 per-tick delta",
        audit.oversized_steps == 0,
        format!("{} oversized steps in {} rows", audit.oversized_steps, audit.rows),
    );
    board.check(
        "9 on-grid txp",
        audit.off_grid == 0,
        format!("{} off-grid rows in {}", audit.off_grid, audit.rows),
    );
}

fn criterion_10(board: &mut Board, model: &ModelConfig) {
    let mut identical = true;
    for name in PRESET_NAMES.iter().filter(|n| !is_sweep(n)) {
        let s = with_seed(preset(name).unwrap(), 42);
        let a = trace_to_csv(&run_scenario(&s, model).unwrap().samples);
        let b = trace_to_csv(&run_scenario(&s, model).unwrap().samples);
        identical &= a == b;
    }
    board.check("10 repeat runs", identical, "every scenario preset, seed 42");

    let base = preset("lab-ramp-hybrid").unwrap();
    let seeds: Vec<u64> = (1..=8).collect();
    let forward: Vec<String> = seeds
        .iter()
        .map(|&s| trace_to_csv(&run_scenario(&with_seed(base.clone(), s), model).unwrap().samples))
        .collect();
    let mut backward: Vec<(u64, String)> = seeds
        .iter()
        .rev()
        .map(|&s| {
            (
                s,
                trace_to_csv(&run_scenario(&with_seed(base.clone(), s), model).unwrap().samples),
            )
        })
        .collect();
    backward.sort_by_key(|(s, _)| *s);
    let parallel: Vec<String> = seeds
        .par_iter()
        .map(|&s| trace_to_csv(&run_scenario(&with_seed(base.clone(), s), model).unwrap().samples))
        .collect();
    let same = forward.iter().zip(&backward).all(|(a, (_, b))| a == b) && forward == parallel;
    board.check("10 batch order", same, "8 seeds forward, reversed and parallel");
}

fn main() -> ExitCode {
    let model = ModelConfig::default();
    for env in Environment::ALL {
        assert_eq!(*model.env.get(env), EnvironmentProfile::default_for(env));
    }
    let mut board = Board::default();
    let mut audit = TraceAudit::default();
    criterion_1(&mut board, &model);
    criterion_2(&mut board, &model);
    criterion_3(&mut board, &model);
    criterion_4(&mut board, &model, &mut audit);
    criterion_5(&mut board, &model, &mut audit);
    criterion_6(&mut board, &model, &mut audit);
    criterion_7(&mut board, &model, &mut audit);
    criterion_8(&mut board, &model);
    criterion_9(&mut board, &audit);
    criterion_10(&mut board, &model);

    let failed: Vec<&str> = board
        .results
        .iter()
        .filter(|(_, p)| !p)
        .map(|(id, _)| id.as_str())
        .collect();
    println!(
        "acceptance: {} of {} clauses passed",
        board.results.len() - failed.len(),
        board.results.len()
    );
    if !failed.is_empty() {
        println!("acceptance: failing clauses: {}", failed.join("; "));
    }
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && !failed.is_empty() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
