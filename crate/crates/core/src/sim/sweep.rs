//! Parameter sweeps over static fixed-power scenarios.

use serde::{Deserialize, Serialize};

use super::{run_scenario_with, RunOptions, ScenarioSpec};
use crate::channel::Environment;
use crate::config::ModelConfig;
use crate::control::{ControllerSpec, Strategy};
use crate::error::{Error, Result};

pub const CALCFREQ_DEFAULT_HZ: [f64; 7] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];
pub const TXP_DEFAULT_DBM: [f64; 6] = [-18.0, -12.0, -4.0, 4.0, 12.0, 20.0];

/// Each calculation frequency runs long enough for this many windows.
pub const MIN_WINDOWS: f64 = 400.0;

/// RSSI sampling rate used by the transmit power sweep.
pub const TXP_SWEEP_SAMPLE_HZ: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalcFreqRow {
    pub calc_hz: f64,
    pub duration_s: f64,
    pub rssi_mean_dbm: f64,
    pub rssi_std_db: f64,
    pub rssi_samples: u64,
    pub throughput_mean_kbps: f64,
    pub throughput_std_kbps: f64,
    pub throughput_windows: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxpRow {
    pub env: Environment,
    pub txp_dbm: f64,
    pub mean_rssi_dbm: f64,
    pub mean_throughput_kbps: f64,
    pub mean_power_mw: f64,
}

fn check_values(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid(what, "needs at least one value"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(what, "values must be finite"));
    }
    Ok(())
}

/// Samples RSSI and estimates throughput at each calculation frequency on
/// the same channel realization.
pub fn calcfreq_sweep(model: &ModelConfig, base: &ScenarioSpec, values: &[f64]) -> Result<Vec<CalcFreqRow>> {
    check_values(values, "calcfreq")?;
    values
        .iter()
        .map(|&hz| {
            if hz <= 0.0 {
                return Err(Error::invalid("calcfreq", "frequencies must be positive"));
            }
            let mut spec = base.clone();
            spec.duration_s = base.duration_s.max(MIN_WINDOWS / hz);
            spec.throughput_calc_hz = hz;
            let opts = RunOptions {
                record_trace: false,
                rssi_sample_hz: Some(hz),
                keep_throughput_history: false,
            };
            let out = run_scenario_with(&spec, model, &opts)?;
            Ok(CalcFreqRow {
                calc_hz: hz,
                duration_s: spec.duration_s,
                rssi_mean_dbm: out.rssi_stats.mean().unwrap_or(f64::NAN),
                rssi_std_db: out.rssi_stats.std().unwrap_or(f64::NAN),
                rssi_samples: out.rssi_stats.count(),
                throughput_mean_kbps: out.throughput_stats.mean().unwrap_or(f64::NAN),
                throughput_std_kbps: out.throughput_stats.std().unwrap_or(f64::NAN),
                throughput_windows: out.throughput_stats.count(),
            })
        })
        .collect()
}

/// Mean RSSI, throughput and power at each fixed transmit power.
pub fn txp_sweep(
    model: &ModelConfig,
    base: &ScenarioSpec,
    envs: &[Environment],
    values: &[f64],
) -> Result<Vec<TxpRow>> {
    check_values(values, "txp")?;
    let mut rows = Vec::with_capacity(envs.len() * values.len());
    for &env in envs {
        for &txp in values {
            let mut spec = base.clone();
            spec.env = env;
            spec.controller = ControllerSpec {
                strategy: Strategy::Fixed,
                fixed_txp_dbm: txp,
                ..base.controller.clone()
            };
            let opts = RunOptions {
                record_trace: false,
                rssi_sample_hz: Some(TXP_SWEEP_SAMPLE_HZ),
                keep_throughput_history: false,
            };
            let out = run_scenario_with(&spec, model, &opts)?;
            rows.push(TxpRow {
                env,
                txp_dbm: model.table.quantize(txp),
                mean_rssi_dbm: out.rssi_stats.mean().unwrap_or(f64::NAN),
                mean_throughput_kbps: out.throughput_stats.mean().unwrap_or(f64::NAN),
                mean_power_mw: out.event_power_stats.mean().unwrap_or(f64::NAN),
            });
        }
    }
    Ok(rows)
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        assert!((regression_slope(&xs, &ys).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(regression_slope(&[1.0], &[1.0]), None);
        assert_eq!(regression_slope(&[2.0, 2.0], &[1.0, 3.0]), None);
    }

    #[test]
    fn sweeps_reject_empty_value_lists() {
        let model = ModelConfig::default();
        let base = super::super::presets::preset("txp-sweep").unwrap();
        assert!(txp_sweep(&model, &base, &[Environment::Lab], &[]).is_err());
        assert!(calcfreq_sweep(&model, &base, &[0.0]).is_err());
    }
}
