//! Versioned run configuration: a single JSON document carrying every
//! tunable for field generation, sensing noise, the MDP, the network
//! and training. Unknown keys are rejected so typos fail loudly;
//! common symbol names (`n_buffer`, `gamma`, ...) are accepted as
//! aliases of the descriptive field names.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dqn::TrainConfig;
use crate::env::EnvConfig;
use crate::field::{FieldConfig, NoiseConfig};
use crate::nn::NetworkSpec;
use crate::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

/// Evaluation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    /// Episodes for simulated (level 1) evaluation.
    pub n_fields: usize,
    /// Grid rotations for dataset (level 2..4) evaluation, degrees
    /// counter-clockwise.
    pub rotations_deg: Vec<u32>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            n_fields: 1000,
            rotations_deg: vec![0, 90, 180, 270],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Schema version; must equal [`CONFIG_VERSION`].
    pub version: u32,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub env: EnvConfig,
    /// Explicit network shape; omitted means the default architecture
    /// sized for `field.grid_size` and `env.fov_size`.
    #[serde(default)]
    pub network: Option<NetworkSpec>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            field: FieldConfig::default(),
            noise: NoiseConfig::default(),
            env: EnvConfig::default(),
            network: None,
            train: TrainConfig::default(),
            eval: EvalSettings::default(),
        }
    }
}

impl RunConfig {
    /// The network shape to build: the explicit one if present, else
    /// the default architecture for the configured field and FOV.
    pub fn network_spec(&self) -> NetworkSpec {
        self.network
            .clone()
            .unwrap_or_else(|| NetworkSpec::for_field(self.field.grid_size, self.env.fov_size))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.field.validate()?;
        self.noise.validate()?;
        self.env.validate()?;
        self.train.validate()?;
        if self.env.fov_size > self.field.grid_size {
            return Err(Error::Config(format!(
                "fov_size {} exceeds grid_size {}",
                self.env.fov_size, self.field.grid_size
            )));
        }
        let spec = self.network_spec();
        spec.validate()?;
        if spec.global_size != 2 * self.field.grid_size - 1 || spec.local_size != self.env.fov_size
        {
            return Err(Error::Config(format!(
                "network expects global {}^2 / local {}^2 input but the field produces {}^2 / {}^2",
                spec.global_size,
                spec.local_size,
                2 * self.field.grid_size - 1,
                self.env.fov_size
            )));
        }
        if self.eval.rotations_deg.is_empty() {
            return Err(Error::Config("rotations_deg must not be empty".into()));
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(json)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
