//! Closed-loop transmit power control for BLE links: channel and link
//! models, PID controllers, and a deterministic simulator that runs them
//! against each other.

pub mod channel;
pub mod config;
pub mod control;
pub mod error;
pub mod measure;
pub mod power;
pub mod radio;
pub mod report;
pub mod rng;
pub mod sim;

pub use channel::{Environment, EnvironmentProfile};
pub use config::{ConfigFile, ModelConfig};
pub use control::{ControllerSpec, PidConfig, PidState, Strategy};
pub use error::{Error, Result};
pub use report::{MetricsSummary, SummaryDocument};
pub use sim::{run_scenario, RunTrace, ScenarioSpec};
