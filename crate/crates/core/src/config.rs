//! Model constants and scenario overrides loaded from a TOML file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{Environment, EnvironmentProfile};
use crate::error::{Error, Result};
use crate::power::PowerModel;
use crate::radio::{FemModel, LinkParams, TxPowerTable};
use crate::sim::ScenarioOverrides;

/// Environment variable naming a config file when no flag is given.
pub const CONFIG_ENV_VAR: &str = "BLE_TXPC_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvProfiles {
    pub rooftop: EnvironmentProfile,
    pub corridor: EnvironmentProfile,
    pub lab: EnvironmentProfile,
}

impl Default for EnvProfiles {
    fn default() -> Self {
        EnvProfiles {
            rooftop: EnvironmentProfile::default_for(Environment::Rooftop),
            corridor: EnvironmentProfile::default_for(Environment::Corridor),
            lab: EnvironmentProfile::default_for(Environment::Lab),
        }
    }
}

impl EnvProfiles {
    pub fn get(&self, env: Environment) -> &EnvironmentProfile {
        match env {
            Environment::Rooftop => &self.rooftop,
            Environment::Corridor => &self.corridor,
            Environment::Lab => &self.lab,
        }
    }

    pub fn get_mut(&mut self, env: Environment) -> &mut EnvironmentProfile {
        match env {
            Environment::Rooftop => &mut self.rooftop,
            Environment::Corridor => &mut self.corridor,
            Environment::Lab => &mut self.lab,
        }
    }

    fn validate(&self) -> Result<()> {
        for env in Environment::ALL {
            let p = self.get(env);
            if p.name != env {
                return Err(Error::invalid(
                    format!("env.{env}.name"),
                    format!("profile is named `{}`", p.name),
                ));
            }
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Grid on which the shadowing process is advanced, seconds.
    pub channel_step_s: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams { channel_step_s: 0.05 }
    }
}

/// Everything besides the scenario itself.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub link: LinkParams,
    pub table: TxPowerTable,
    pub fem: FemModel,
    pub power: PowerModel,
    pub env: EnvProfiles,
    pub sim: SimParams,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        self.table.validate()?;
        self.fem.validate()?;
        self.power.validate()?;
        self.env.validate()?;
        if !(self.sim.channel_step_s.is_finite() && self.sim.channel_step_s > 0.0) {
            return Err(Error::invalid("sim.channel_step_s", "must be positive"));
        }
        Ok(())
    }
}

/// Contents of a config file: model constants plus optional scenario
/// overrides applied on top of a preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub link: LinkParams,
    pub table: TxPowerTable,
    pub fem: FemModel,
    pub power: PowerModel,
    pub env: EnvProfiles,
    pub sim: SimParams,
    pub scenario: ScenarioOverrides,
}

impl ConfigFile {
    pub fn new(model: ModelConfig, scenario: ScenarioOverrides) -> Self {
        let ModelConfig {
            link,
            table,
            fem,
            power,
            env,
            sim,
        } = model;
        ConfigFile {
            link,
            table,
            fem,
            power,
            env,
            sim,
            scenario,
        }
    }

    pub fn into_parts(self) -> (ModelConfig, ScenarioOverrides) {
        let ConfigFile {
            link,
            table,
            fem,
            power,
            env,
            sim,
            scenario,
        } = self;
        (
            ModelConfig {
                link,
                table,
                fem,
                power,
                env,
                sim,
            },
            scenario,
        )
    }

    pub fn parse(text: &str) -> Result<(ModelConfig, ScenarioOverrides)> {
        let (model, scenario) = toml::from_str::<ConfigFile>(text)?.into_parts();
        model.validate()?;
        scenario.validate()?;
        Ok((model, scenario))
    }

    pub fn load(path: &Path) -> Result<(ModelConfig, ScenarioOverrides)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}
