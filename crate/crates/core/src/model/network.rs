//! Forward pass of the disaggregation model on a [`Tape`].

use super::params::{Block, Linear, ModelParams};
use crate::dataset::{Variate, WindowSample};
use crate::error::{Error, Result};
use crate::numeric::{Matrix, Tape, Var};

#[derive(Debug, Clone, Copy)]
pub struct BoundLinear {
    pub weight: Var,
    pub bias: Var,
}

impl BoundLinear {
    fn bind(tape: &mut Tape, l: &Linear) -> Self {
        Self {
            weight: tape.param(&l.weight),
            bias: tape.param(&l.bias),
        }
    }

    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        tape.affine(x, self.weight, self.bias)
    }

    fn vars(&self) -> [Var; 2] {
        [self.weight, self.bias]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundBlock {
    pub query: BoundLinear,
    pub key: BoundLinear,
    pub value: BoundLinear,
    pub output: BoundLinear,
    pub ff_in: BoundLinear,
    pub ff_out: BoundLinear,
}

/// Model parameters recorded as tape leaves.
#[derive(Debug, Clone)]
pub struct BoundModel {
    pub embedding: BoundLinear,
    pub blocks: Vec<BoundBlock>,
    pub head: BoundLinear,
    d_k: usize,
    input_width: usize,
}

/// Per-sample forward outputs.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    /// `1 × 48` PV estimate.
    pub prediction: Var,
    /// `4 × d_emb` final-block representation.
    pub hidden: Var,
}

impl BoundModel {
    pub fn bind(tape: &mut Tape, params: &ModelParams) -> Self {
        let embedding = BoundLinear::bind(tape, &params.embedding);
        let blocks = params
            .blocks
            .iter()
            .map(|b: &Block| BoundBlock {
                query: BoundLinear::bind(tape, &b.query),
                key: BoundLinear::bind(tape, &b.key),
                value: BoundLinear::bind(tape, &b.value),
                output: BoundLinear::bind(tape, &b.output),
                ff_in: BoundLinear::bind(tape, &b.ff_in),
                ff_out: BoundLinear::bind(tape, &b.ff_out),
            })
            .collect();
        let head = BoundLinear::bind(tape, &params.head);
        Self {
            embedding,
            blocks,
            head,
            d_k: params.config.d_k,
            input_width: params.config.input_width(),
        }
    }

    /// Leaves in the same order as [`ModelParams::tensors`].
    pub fn vars(&self) -> Vec<Var> {
        let mut out = self.embedding.vars().to_vec();
        for b in &self.blocks {
            for l in [b.query, b.key, b.value, b.output, b.ff_in, b.ff_out] {
                out.extend(l.vars());
            }
        }
        out.extend(self.head.vars());
        out
    }

    /// Maps each variate's full window through the shared embedding.
    pub fn embed_variates(&self, tape: &mut Tape, input: &Matrix) -> Result<Var> {
        if input.rows() != Variate::ALL.len() || input.cols() != self.input_width {
            return Err(Error::dim(
                "embed_variates",
                input.shape_str(),
                format!("4x{}", self.input_width),
            ));
        }
        let x = tape.input(input.clone());
        self.embedding.apply(tape, x)
    }

    pub fn block_forward(&self, tape: &mut Tape, block: &BoundBlock, h: Var) -> Result<Var> {
        let q = block.query.apply(tape, h)?;
        let k = block.key.apply(tape, h)?;
        let v = block.value.apply(tape, h)?;
        let attended = tape.scaled_dot_attention(q, k, v, self.d_k)?;
        let a = block.output.apply(tape, attended)?;
        let hidden = block.ff_in.apply(tape, a)?;
        let hidden = tape.relu(hidden);
        block.ff_out.apply(tape, hidden)
    }

    pub fn forward(&self, tape: &mut Tape, input: &Matrix) -> Result<ForwardVars> {
        let mut h = self.embed_variates(tape, input)?;
        for block in &self.blocks {
            h = self.block_forward(tape, block, h)?;
        }
        let net = tape.select_row(h, Variate::Net.row())?;
        let prediction = self.head.apply(tape, net)?;
        Ok(ForwardVars { prediction, hidden: h })
    }

    /// Mean squared error over every slot of every sample in `batch`.
    pub fn batch_loss(&self, tape: &mut Tape, batch: &[&WindowSample]) -> Result<Var> {
        if batch.is_empty() {
            return Err(Error::Contract("loss over an empty batch".into()));
        }
        let mut terms = Vec::with_capacity(batch.len());
        let mut count = 0usize;
        for s in batch {
            let out = self.forward(tape, &s.input)?;
            let target = Matrix::row_vector(s.target.clone());
            terms.push(tape.squared_error(out.prediction, &target)?);
            count += s.target.len();
        }
        let total = tape.sum(&terms)?;
        Ok(tape.scale(total, 1.0 / count as f64))
    }
}

/// Prediction and final hidden state for one input, without gradients.
pub fn predict(params: &ModelParams, input: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let mut tape = Tape::new();
    let bound = BoundModel::bind(&mut tape, params);
    let out = bound.forward(&mut tape, input)?;
    Ok((
        tape.value(out.prediction).data().to_vec(),
        tape.value(out.hidden).clone(),
    ))
}

/// Batch MSE without touching gradients.
pub fn compute_loss(params: &ModelParams, batch: &[&WindowSample]) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = BoundModel::bind(&mut tape, params);
    let loss = bound.batch_loss(&mut tape, batch)?;
    Ok(tape.value(loss).get(0, 0))
}

/// Batch MSE; fills every parameter's gradient.
pub fn loss_and_grads(params: &mut ModelParams, batch: &[&WindowSample]) -> Result<f64> {
    params.zero_grads();
    let mut tape = Tape::new();
    let bound = BoundModel::bind(&mut tape, params);
    let loss = bound.batch_loss(&mut tape, batch)?;
    let value = tape.value(loss).get(0, 0);
    let grads = tape.backward(loss)?;
    for (t, v) in params.tensors_mut().into_iter().zip(bound.vars()) {
        t.set_grads(grads.wrt(v).data())?;
    }
    Ok(value)
}
