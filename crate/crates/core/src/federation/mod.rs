//! Personalized federated training across data centers, with full-model
//! averaging and isolated local training as baselines.

mod algebra;
mod engine;
mod server;

pub use algebra::{aggregate_base, aggregate_embedding, aggregation_weights, compute_lambda, local_aggregate};
pub use engine::{
    onboard_new_center, run_fedavg, run_local_only, run_pfl, CenterRound, Client, ClientSnapshot, Federation,
    FederationConfig, FederationSnapshot, LambdaMode, RoundRecord, Strategy,
};
pub use server::{server_aggregate, ClientUpload, GlobalState};

#[cfg(test)]
mod tests;
