//! JSON model checkpoints. `f64` values round-trip exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::{ModelParams, NamedTensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "pvfl-model";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: ModelConfig,
    tensors: Vec<NamedTensor>,
}

pub fn to_json(params: &ModelParams) -> Result<String> {
    let ckpt = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config: params.config.clone(),
        tensors: params
            .named_tensors()
            .into_iter()
            .map(|(name, t)| NamedTensor {
                name,
                tensor: t.clone(),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&ckpt)?)
}

pub fn from_json(text: &str) -> Result<ModelParams> {
    let ckpt: Checkpoint = serde_json::from_str(text)?;
    if ckpt.format != CHECKPOINT_FORMAT {
        return Err(Error::Format(format!(
            "not a model checkpoint: format {:?}",
            ckpt.format
        )));
    }
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            ckpt.version
        )));
    }
    ModelParams::from_named(&ckpt.config, ckpt.tensors)
}

pub fn save(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json(params)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
