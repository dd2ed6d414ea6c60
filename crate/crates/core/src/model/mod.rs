//! Transformer disaggregation model: variate-token embedding, attention
//! blocks, output projection, training and PV-condition embeddings.

pub mod baseline;
pub mod checkpoint;
mod config;
mod embedding;
mod network;
mod params;
mod train;

pub use config::ModelConfig;
pub use embedding::{pv_condition_embedding, recent_samples, IrradianceEmbedding, DEFAULT_RECENT_DAYS};
pub use network::{compute_loss, loss_and_grads, predict, BoundModel, ForwardVars};
pub use params::{Block, Linear, ModelParams, NamedTensor, ParamSet, SplitPolicy};
pub use train::{local_train, local_train_epochs};
