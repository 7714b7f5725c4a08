use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::error::{Error, Result};
use crate::nn::{ParamStore, PolicyParams, RoutingMode, RunningStats};

pub const FORMAT_VERSION: u32 = 1;

/// A tensor as stored on disk: shape plus row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: [usize; 2],
    pub values: Vec<f32>,
}

/// Single-document snapshot of a policy and the run that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub run_config: RunConfig,
    pub iteration: usize,
    pub tensors: BTreeMap<String, TensorRecord>,
    /// Return statistics of the task, obj1 and obj2 critics.
    pub value_norm: [RunningStats; 3],
}

impl Checkpoint {
    pub fn from_policy(run_config: &RunConfig, policy: &PolicyParams<f32>, iteration: usize) -> Self {
        let tensors = policy
            .store
            .iter()
            .map(|(name, t)| {
                let (r, c) = t.dim();
                (
                    name.to_string(),
                    TensorRecord {
                        shape: [r, c],
                        values: t.iter().copied().collect(),
                    },
                )
            })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            run_config: run_config.clone(),
            iteration,
            tensors,
            value_norm: policy.value_norm,
        }
    }

    /// Rebuilds the policy, checking names and shapes against the network
    /// the stored run config describes.
    pub fn policy(&self) -> Result<PolicyParams<f32>> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let run = &self.run_config;
        let spec = run.env_params.spec(run.env);
        let mode = if run.train.ablation_gate {
            RoutingMode::Gate
        } else {
            RoutingMode::Beta
        };
        let mut store = ParamStore::new();
        for (name, rec) in &self.tensors {
            let t = Array2::from_shape_vec((rec.shape[0], rec.shape[1]), rec.values.clone())
                .map_err(|_| Error::Checkpoint(format!("tensor `{name}`: shape {:?} does not match its values", rec.shape)))?;
            store.insert(name.clone(), t);
        }
        let mut policy = PolicyParams::from_store(run.network.clone(), mode, &spec, store)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        policy.value_norm = self.value_norm;
        Ok(policy)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
