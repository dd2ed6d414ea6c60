//! Two-layer MLP over the flattened window, used as a reference point
//! for the transformer model.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::params::Linear;
use crate::dataset::WindowSample;
use crate::error::{Error, Result};
use crate::numeric::{Matrix, Tape};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpBaseline {
    pub hidden: Linear,
    pub out: Linear,
    pub learning_rate: f64,
    pub batch_size: usize,
}

fn flat_input(s: &WindowSample) -> Matrix {
    Matrix::row_vector(s.input.data().to_vec())
}

impl MlpBaseline {
    pub fn init(
        input_len: usize,
        hidden: usize,
        horizon: usize,
        learning_rate: f64,
        batch_size: usize,
        seed: u64,
    ) -> Self {
        let mut rng = rng_for(seed, &[0x6d6c70]);
        Self {
            hidden: Linear::init(input_len, hidden, &mut rng),
            out: Linear::init(hidden, horizon, &mut rng),
            learning_rate,
            batch_size: batch_size.max(1),
        }
    }

    pub fn predict(&self, s: &WindowSample) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let (w1, b1) = (tape.param(&self.hidden.weight), tape.param(&self.hidden.bias));
        let (w2, b2) = (tape.param(&self.out.weight), tape.param(&self.out.bias));
        let x = tape.input(flat_input(s));
        let h = tape.affine(x, w1, b1)?;
        let h = tape.relu(h);
        let y = tape.affine(h, w2, b2)?;
        Ok(tape.value(y).data().to_vec())
    }

    /// One epoch of mini-batch SGD; returns the mean training loss.
    pub fn train_epoch(&mut self, train: &[WindowSample], rng: &mut ChaCha8Rng) -> Result<f64> {
        if train.is_empty() {
            return Err(Error::Contract("MLP training needs samples".into()));
        }
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(self.batch_size) {
            let mut tape = Tape::new();
            let (w1, b1) = (tape.param(&self.hidden.weight), tape.param(&self.hidden.bias));
            let (w2, b2) = (tape.param(&self.out.weight), tape.param(&self.out.bias));
            let mut terms = Vec::with_capacity(chunk.len());
            let mut count = 0;
            for &i in chunk {
                let s = &train[i];
                let x = tape.input(flat_input(s));
                let h = tape.affine(x, w1, b1)?;
                let h = tape.relu(h);
                let y = tape.affine(h, w2, b2)?;
                terms.push(tape.squared_error(y, &Matrix::row_vector(s.target.clone()))?);
                count += s.target.len();
            }
            let total = tape.sum(&terms)?;
            let loss = tape.scale(total, 1.0 / count as f64);
            let value = tape.value(loss).get(0, 0);
            if !value.is_finite() {
                return Err(Error::Divergence {
                    epoch: 0,
                    learning_rate: self.learning_rate,
                });
            }
            weighted += value * chunk.len() as f64;
            let grads = tape.backward(loss)?;
            for (t, v) in [
                (&mut self.hidden.weight, w1),
                (&mut self.hidden.bias, b1),
                (&mut self.out.weight, w2),
                (&mut self.out.bias, b2),
            ] {
                t.set_grads(grads.wrt(v).data())?;
                t.sgd_step(self.learning_rate);
            }
        }
        Ok(weighted / train.len() as f64)
    }
}
