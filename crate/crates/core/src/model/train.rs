use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::network::loss_and_grads;
use super::params::ModelParams;
use crate::dataset::WindowSample;
use crate::error::{Error, Result};

/// Mini-batch SGD for `config.epochs_per_round` epochs.
///
/// Batch order is a fresh shuffle from `rng` each epoch. Returns the mean
/// training loss of each epoch (sample-weighted over its batches).
pub fn local_train(params: &mut ModelParams, train: &[WindowSample], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    local_train_epochs(params, train, params.config.epochs_per_round, rng)
}

pub fn local_train_epochs(
    params: &mut ModelParams,
    train: &[WindowSample],
    epochs: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(Error::Contract("local training needs a non-empty training set".into()));
    }
    let lr = params.config.learning_rate;
    let batch_size = params.config.batch_size;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        order.shuffle(rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<&WindowSample> = chunk.iter().map(|&i| &train[i]).collect();
            let loss = loss_and_grads(params, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch: epoch + 1,
                    learning_rate: lr,
                });
            }
            weighted += loss * batch.len() as f64;
            for t in params.tensors_mut() {
                t.sgd_step(lr);
            }
        }
        let mean = weighted / train.len() as f64;
        if params.flatten().iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                epoch: epoch + 1,
                learning_rate: lr,
            });
        }
        trace.push(mean);
    }
    Ok(trace)
}
