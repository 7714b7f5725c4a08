use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::amp::AmpConfig;
use crate::envs::{EnvName, EnvParams};
use crate::error::{Error, Result};
use crate::nn::NetworkConfig;
use crate::train::TrainConfig;

/// Everything needed to reproduce a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvName,
    #[serde(default)]
    pub env_params: EnvParams,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub amp: AmpConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

impl RunConfig {
    pub fn new(env: EnvName) -> Self {
        Self {
            env,
            env_params: EnvParams::default(),
            train: TrainConfig::default(),
            network: NetworkConfig::default(),
            amp: AmpConfig::default(),
            seed: 0,
            output_dir: default_output_dir(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env_params.validate()?;
        self.train.validate()?;
        self.network.validate()?;
        self.amp.validate()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}
