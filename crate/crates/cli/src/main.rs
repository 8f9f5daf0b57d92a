mod args;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use ble_txpc::radio::{effective_tx_power, FemModel};
use ble_txpc::report::{write_comparison, write_outputs};
use ble_txpc::sim::presets::{self, is_sweep, PRESET_NAMES};
use ble_txpc::sim::sweep::{self, CalcFreqRow, TxpRow, CALCFREQ_DEFAULT_HZ, TXP_DEFAULT_DBM};
use ble_txpc::sim::ScenarioOverrides;
use ble_txpc::{run_scenario, ConfigFile, Environment, ModelConfig, ScenarioSpec, SummaryDocument};
use clap::Parser;
use rayon::prelude::*;

use args::{BatchArgs, Cli, Command, OverrideArgs, RunArgs, SweepArgs, SweepKind};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Run(a) => cmd_run(config, a),
        Command::Batch(a) => cmd_batch(config, a),
        Command::Sweep(a) => cmd_sweep(config, a),
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(())
        }
        Command::DumpDefaults => {
            let (model, scenario) = load_config(config)?;
            print!("{}", ConfigFile::new(model, scenario).to_toml()?);
            Ok(())
        }
        Command::PowerTable => {
            let (model, _) = load_config(config)?;
            print!("{}", power_table(&model));
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<(ModelConfig, ScenarioOverrides)> {
    match path {
        Some(p) => ConfigFile::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok((ModelConfig::default(), ScenarioOverrides::default())),
    }
}

/// Preset, then config-file overrides, then flags.
fn resolve(
    config: Option<&Path>,
    preset: &str,
    flags: &OverrideArgs,
    seed: Option<u64>,
) -> Result<(ModelConfig, ScenarioSpec)> {
    let (model, from_file) = load_config(config)?;
    let mut spec = presets::preset(preset)?;
    let mut over = from_file.merged(&flags.to_overrides());
    if seed.is_some() {
        over.seed = seed;
    }
    over.apply(&mut spec)?;
    Ok((model, spec))
}

fn default_prefix(spec: &ScenarioSpec, dir: &Path) -> PathBuf {
    dir.join(format!("{}-seed{}", spec.name, spec.seed))
}

fn cmd_run(config: Option<&Path>, a: &RunArgs) -> Result<()> {
    let (model, spec) = resolve(config, &a.preset, &a.overrides, a.seed)?;
    if is_sweep(&a.preset) {
        let kind = if a.preset == "calcfreq-sweep" {
            SweepKind::Calcfreq
        } else {
            SweepKind::Txp
        };
        let out = a.out.as_ref().map(|p| with_suffix(p, ".sweep.csv"));
        return run_sweep(kind, &model, &spec, None, None, out.as_deref());
    }
    let trace = run_scenario(&spec, &model)?;
    let doc = SummaryDocument::new(&spec, &trace);
    let prefix = a
        .out
        .clone()
        .unwrap_or_else(|| default_prefix(&spec, Path::new("runs")));
    let paths = write_outputs(&trace, &doc, &prefix)?;
    print!("{}", summary_table(std::slice::from_ref(&doc)));
    for e in &doc.events {
        println!("event {:>9.3} s  {}", e.t_s, e.label);
    }
    println!("wrote {} and {}", paths.trace.display(), paths.summary.display());
    Ok(())
}

fn cmd_batch(config: Option<&Path>, a: &BatchArgs) -> Result<()> {
    if is_sweep(&a.preset) {
        anyhow::bail!("`{}` is a sweep; use the sweep subcommand", a.preset);
    }
    let (model, base) = resolve(config, &a.preset, &a.overrides, None)?;
    let one = |&seed: &u64| -> Result<SummaryDocument> {
        let mut spec = base.clone();
        spec.seed = seed;
        let trace = run_scenario(&spec, &model)?;
        let doc = SummaryDocument::new(&spec, &trace);
        write_outputs(&trace, &doc, &default_prefix(&spec, &a.out))?;
        Ok(doc)
    };
    let docs: Vec<SummaryDocument> = if a.serial {
        a.seeds.0.iter().map(one).collect::<Result<_>>()?
    } else {
        a.seeds.0.par_iter().map(one).collect::<Result<_>>()?
    };
    let table = a.out.join(format!("{}.batch.csv", base.name));
    write_comparison(&docs, &table)?;
    print!("{}", summary_table(&docs));
    println!("wrote {} runs and {}", docs.len(), table.display());
    Ok(())
}

fn cmd_sweep(config: Option<&Path>, a: &SweepArgs) -> Result<()> {
    let name = match a.kind {
        SweepKind::Calcfreq => "calcfreq-sweep",
        SweepKind::Txp => "txp-sweep",
    };
    let (model, spec) = resolve(config, name, &a.overrides, a.seed)?;
    let envs = a.envs.clone().or(a.overrides.env.map(|e| vec![e]));
    run_sweep(
        a.kind,
        &model,
        &spec,
        a.values.as_deref(),
        envs.as_deref(),
        a.out.as_deref(),
    )
}

fn run_sweep(
    kind: SweepKind,
    model: &ModelConfig,
    base: &ScenarioSpec,
    values: Option<&[f64]>,
    envs: Option<&[Environment]>,
    out: Option<&Path>,
) -> Result<()> {
    let csv = match kind {
        SweepKind::Calcfreq => {
            let rows = sweep::calcfreq_sweep(model, base, values.unwrap_or(&CALCFREQ_DEFAULT_HZ))?;
            print!("{}", calcfreq_table(&rows));
            calcfreq_csv(&rows)
        }
        SweepKind::Txp => {
            let envs = envs.unwrap_or(&Environment::ALL);
            let rows = sweep::txp_sweep(model, base, envs, values.unwrap_or(&TXP_DEFAULT_DBM))?;
            print!("{}", txp_table(&rows, envs));
            txp_csv(&rows)
        }
    };
    if let Some(path) = out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

fn summary_table(docs: &[SummaryDocument]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<26} {:>10} {:>6} {:>9} {:>7} {:>9} {:>8} {:>7} {:>8} {:>10} {:>9}",
        "scenario", "strategy", "seed", "rssi", "rssi_sd", "kbps", "kbps_sd", "txp", "mW", "disconnect", "recovery"
    );
    for d in docs {
        let m = &d.metrics;
        let _ = writeln!(
            s,
            "{:<26} {:>10} {:>6} {:>9} {:>7} {:>9} {:>8} {:>7} {:>8} {:>10} {:>9}",
            d.scenario,
            d.strategy.as_str(),
            d.seed,
            opt(m.mean_rssi_dbm, 2),
            opt(m.std_rssi_db, 2),
            opt(m.mean_throughput_kbps, 1),
            opt(m.std_throughput_kbps, 1),
            opt(m.mean_txp_dbm, 2),
            opt(m.mean_power_mw, 2),
            opt(m.disconnect_time_s, 2),
            opt(m.recovery_time_s, 2),
        );
    }
    s
}

fn calcfreq_table(rows: &[CalcFreqRow]) -> String {
    let mut s = format!(
        "{:>10} {:>10} {:>10} {:>8} {:>11} {:>10} {:>9}\n",
        "calc_hz", "duration_s", "rssi", "rssi_sd", "kbps", "kbps_sd", "windows"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>10} {:>10} {:>10.2} {:>8.2} {:>11.1} {:>10.1} {:>9}",
            r.calc_hz,
            r.duration_s,
            r.rssi_mean_dbm,
            r.rssi_std_db,
            r.throughput_mean_kbps,
            r.throughput_std_kbps,
            r.throughput_windows
        );
    }
    s
}

fn calcfreq_csv(rows: &[CalcFreqRow]) -> String {
    let mut s = String::from(
        "calc_hz,duration_s,rssi_mean_dbm,rssi_std_db,rssi_samples,throughput_mean_kbps,throughput_std_kbps,throughput_windows\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.calc_hz,
            r.duration_s,
            r.rssi_mean_dbm,
            r.rssi_std_db,
            r.rssi_samples,
            r.throughput_mean_kbps,
            r.throughput_std_kbps,
            r.throughput_windows
        );
    }
    s
}

fn txp_table(rows: &[TxpRow], envs: &[Environment]) -> String {
    let mut s = format!("{:<9} {:>8} {:>9} {:>9} {:>8}\n", "env", "txp", "rssi", "kbps", "mW");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<9} {:>8} {:>9.2} {:>9.1} {:>8.2}",
            r.env.as_str(),
            r.txp_dbm,
            r.mean_rssi_dbm,
            r.mean_throughput_kbps,
            r.mean_power_mw
        );
    }
    for env in envs {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.env == *env)
            .map(|r| (r.txp_dbm, r.mean_rssi_dbm))
            .unzip();
        if let Some(slope) = sweep::regression_slope(&xs, &ys) {
            let _ = writeln!(s, "{env}: rssi slope {slope:.3} dB/dB");
        }
    }
    s
}

fn txp_csv(rows: &[TxpRow]) -> String {
    let mut s = String::from("env,txp_dbm,mean_rssi_dbm,mean_throughput_kbps,mean_power_mw\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.env, r.txp_dbm, r.mean_rssi_dbm, r.mean_throughput_kbps, r.mean_power_mw
        );
    }
    s
}

fn power_table(model: &ModelConfig) -> String {
    let with = FemModel {
        tx_present: true,
        ..model.fem.clone()
    };
    let without = FemModel {
        tx_present: false,
        ..model.fem.clone()
    };
    let mut s = format!(
        "{:>8} {:>12} {:>12} {:>12} {:>12}\n",
        "txp_dbm", "out_fem_dbm", "out_bare_dbm", "radio_fem_mw", "radio_bare_mw"
    );
    for &level in model.table.levels() {
        let fem_out = effective_tx_power(level, &with);
        let bare_out = effective_tx_power(level, &without);
        let _ = writeln!(
            s,
            "{:>8} {:>12} {:>12} {:>12.2} {:>12.2}",
            level,
            fem_out,
            bare_out,
            model.power.radio_power(fem_out) * model.power.fem_multiplier,
            model.power.radio_power(bare_out)
        );
    }
    s
}
