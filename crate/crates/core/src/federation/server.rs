//! The server side of the protocol. Its only input type is [`ClientUpload`],
//! which carries shared base parameters, an irradiance embedding and a
//! sample count; raw windows and heads never reach it.

use serde::{Deserialize, Serialize};

use super::algebra::{aggregate_base, aggregate_embedding};
use crate::error::{Error, Result};
use crate::model::{IrradianceEmbedding, ParamSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientUpload {
    pub center_id: String,
    pub base: ParamSet,
    /// Absent for full-model averaging, which shares no embedding.
    pub embedding: Option<IrradianceEmbedding>,
    pub volume: usize,
}

/// Aggregated artifacts broadcast at the end of a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalState {
    pub round: usize,
    pub base: ParamSet,
    pub embedding: Option<IrradianceEmbedding>,
}

pub fn server_aggregate(round: usize, uploads: &[ClientUpload]) -> Result<GlobalState> {
    if uploads.is_empty() {
        return Err(Error::Contract("server received no uploads".into()));
    }
    let volumes: Vec<usize> = uploads.iter().map(|u| u.volume).collect();
    let bases: Vec<(&str, &ParamSet)> = uploads.iter().map(|u| (u.center_id.as_str(), &u.base)).collect();
    let base = aggregate_base(&bases, &volumes)?;

    let with: Vec<(&str, &IrradianceEmbedding)> = uploads
        .iter()
        .filter_map(|u| u.embedding.as_ref().map(|e| (u.center_id.as_str(), e)))
        .collect();
    let embedding = if with.is_empty() {
        None
    } else if with.len() == uploads.len() {
        Some(aggregate_embedding(&with, &volumes)?)
    } else {
        let missing = uploads.iter().find(|u| u.embedding.is_none()).expect("some missing");
        return Err(Error::Aggregation {
            center: missing.center_id.clone(),
            detail: "upload lacks an irradiance embedding".into(),
        });
    };
    Ok(GlobalState { round, base, embedding })
}
