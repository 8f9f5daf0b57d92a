use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use ble_txpc::config::CONFIG_ENV_VAR;
use ble_txpc::sim::{LoopOverrides, Motion, ScenarioOverrides};
use ble_txpc::{Environment, Strategy};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "ble-txpc",
    version,
    about = "Closed-loop BLE transmit power control simulator"
)]
pub struct Cli {
    /// TOML file with model constants and scenario overrides.
    #[arg(long, global = true, env = CONFIG_ENV_VAR)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one preset (or its sweep) and write trace and summary files.
    Run(RunArgs),
    /// Run one preset over several seeds.
    Batch(BatchArgs),
    /// Sweep the estimator calculation frequency or the transmit power.
    Sweep(SweepArgs),
    /// List the canned scenarios.
    Presets,
    /// Print every model constant as a config file.
    DumpDefaults,
    /// Print the transmit power table with and without the FEM.
    PowerTable,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub preset: String,
    #[command(flatten)]
    pub overrides: OverrideArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path prefix; `.trace.csv` and `.summary.json` are appended.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    pub preset: String,
    #[command(flatten)]
    pub overrides: OverrideArgs,
    /// Seeds as a list and/or inclusive ranges, e.g. `1..10` or `1,4,9..12`.
    #[arg(long, value_parser = parse_seeds)]
    pub seeds: SeedList,
    /// Output directory.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Run seeds one after another.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Calcfreq,
    Txp,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub kind: SweepKind,
    /// Comma-separated values (Hz or dBm).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Option<Vec<f64>>,
    /// Environments for the transmit power sweep.
    #[arg(long, value_delimiter = ',')]
    pub envs: Option<Vec<Environment>>,
    #[command(flatten)]
    pub overrides: OverrideArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV file for the sweep table.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OverrideArgs {
    #[arg(long)]
    pub env: Option<Environment>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long, allow_hyphen_values = true)]
    pub target_rssi: Option<f64>,
    #[arg(long)]
    pub target_kbps: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub fixed_txp: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub initial_txp: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kp: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub ki: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kd: Option<f64>,
    #[arg(long)]
    pub update_hz: Option<f64>,
    /// Per-tick output limit of every loop, dB.
    #[arg(long)]
    pub clamp: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub inner_kp: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub inner_ki: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub inner_kd: Option<f64>,
    #[arg(long)]
    pub inner_update_hz: Option<f64>,
    #[arg(long)]
    pub inner_clamp: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub outer_kp: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub outer_ki: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub outer_kd: Option<f64>,
    #[arg(long)]
    pub outer_update_hz: Option<f64>,
    #[arg(long)]
    pub outer_clamp: Option<f64>,
    #[arg(long)]
    pub duration: Option<f64>,
    /// Linear walk `start:end:seconds`, metres.
    #[arg(long, value_parser = parse_ramp)]
    pub ramp: Option<Motion>,
    /// Fixed distance, metres.
    #[arg(long, conflicts_with = "ramp")]
    pub distance: Option<f64>,
    /// Throughput estimator calculation frequency, Hz.
    #[arg(long)]
    pub calc_hz: Option<f64>,
}

impl OverrideArgs {
    pub fn to_overrides(&self) -> ScenarioOverrides {
        let motion = self
            .ramp
            .or(self.distance.map(|distance_m| Motion::Static { distance_m }));
        ScenarioOverrides {
            env: self.env,
            strategy: self.strategy,
            target_rssi_dbm: self.target_rssi,
            target_kbps: self.target_kbps,
            fixed_txp_dbm: self.fixed_txp,
            initial_txp_dbm: self.initial_txp,
            kp: self.kp,
            ki: self.ki,
            kd: self.kd,
            update_hz: self.update_hz,
            clamp: self.clamp,
            inner: LoopOverrides {
                kp: self.inner_kp,
                ki: self.inner_ki,
                kd: self.inner_kd,
                update_hz: self.inner_update_hz,
                clamp: self.inner_clamp,
            },
            outer: LoopOverrides {
                kp: self.outer_kp,
                ki: self.outer_ki,
                kd: self.outer_kd,
                update_hz: self.outer_update_hz,
                clamp: self.outer_clamp,
            },
            duration_s: self.duration,
            motion,
            seed: None,
            throughput_calc_hz: self.calc_hz,
        }
    }
}

fn parse_ramp(s: &str) -> Result<Motion> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, end, duration] = parts.as_slice() else {
        bail!("expected start:end:seconds");
    };
    let num = |v: &str| v.trim().parse::<f64>().with_context(|| format!("bad number `{v}`"));
    let motion = Motion::Ramp {
        start_m: num(start)?,
        end_m: num(end)?,
        duration_s: num(duration)?,
    };
    motion.validate()?;
    Ok(motion)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

pub fn parse_seeds(s: &str) -> Result<SeedList> {
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.parse().with_context(|| format!("bad seed `{a}`"))?;
            let b: u64 = b
                .trim_start_matches('=')
                .parse()
                .with_context(|| format!("bad seed `{b}`"))?;
            if b < a {
                bail!("empty seed range `{part}`");
            }
            seeds.extend(a..=b);
        } else {
            seeds.push(part.parse().with_context(|| format!("bad seed `{part}`"))?);
        }
    }
    if seeds.is_empty() {
        bail!("at least one seed is required");
    }
    let mut seen = std::collections::HashSet::new();
    seeds.retain(|s| seen.insert(*s));
    Ok(SeedList(seeds))
}
