use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::numeric::ParamTensor;
use crate::seed::rng_for;

/// Fully connected layer `x·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
}

impl Linear {
    /// Xavier-uniform weights, zero bias.
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let values = (0..fan_in * fan_out).map(|_| rng.random_range(-a..a)).collect();
        Self {
            weight: ParamTensor::new(vec![fan_in, fan_out], values).expect("shape matches"),
            bias: ParamTensor::zeros(vec![fan_out]),
        }
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[1]
    }
}

/// One transformer block: single-head attention with separate query, key,
/// value and output projections, then a two-layer ReLU feed-forward.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub ff_in: Linear,
    pub ff_out: Linear,
}

impl Block {
    fn layers(&self) -> [(&'static str, &Linear); 6] {
        [
            ("query", &self.query),
            ("key", &self.key),
            ("value", &self.value),
            ("output", &self.output),
            ("ff_in", &self.ff_in),
            ("ff_out", &self.ff_out),
        ]
    }

    fn layers_mut(&mut self) -> [&mut Linear; 6] {
        [
            &mut self.query,
            &mut self.key,
            &mut self.value,
            &mut self.output,
            &mut self.ff_in,
            &mut self.ff_out,
        ]
    }
}

/// Complete local model: shared variate embedding, transformer blocks and
/// the output projection applied to the net-load token.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub embedding: Linear,
    pub blocks: Vec<Block>,
    pub head: Linear,
}

/// Which tensors stay local when the model is split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    /// Head is the output projection; everything below is shared.
    #[default]
    OutputHead,
    /// Nothing stays local; the whole model is the shared part.
    EmptyHead,
}

/// A named tensor inside a [`ParamSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: ParamTensor,
}

/// An ordered slice of a model's tensors (a base or a head).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub entries: Vec<NamedTensor>,
}

impl ParamSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value_count(&self) -> usize {
        self.entries.iter().map(|e| e.tensor.len()).sum()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    /// All values in entry order.
    pub fn flatten(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|e| e.tensor.values().iter().copied())
            .collect()
    }

    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.name == b.name && a.tensor.same_shape(&b.tensor))
    }

    pub fn describe_layout(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}{:?}", e.name, e.tensor.shape()))
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl ModelParams {
    /// Deterministic initialization from `seed`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_for(seed, &[0x6d6f64656c]);
        let embedding = Linear::init(config.input_width(), config.d_emb, &mut rng);
        let blocks = (0..config.blocks)
            .map(|_| Block {
                query: Linear::init(config.d_emb, config.d_k, &mut rng),
                key: Linear::init(config.d_emb, config.d_k, &mut rng),
                value: Linear::init(config.d_emb, config.d_k, &mut rng),
                output: Linear::init(config.d_k, config.d_emb, &mut rng),
                ff_in: Linear::init(config.d_emb, config.d_ff, &mut rng),
                ff_out: Linear::init(config.d_ff, config.d_emb, &mut rng),
            })
            .collect();
        let head = Linear::init(config.d_emb, config.horizon(), &mut rng);
        Ok(Self {
            config: config.clone(),
            embedding,
            blocks,
            head,
        })
    }

    /// Fresh output projection drawn from `seed`, as for a newly joining center.
    pub fn fresh_head(config: &ModelConfig, seed: u64) -> Linear {
        let mut rng = rng_for(seed, &[0x68656164]);
        Linear::init(config.d_emb, config.horizon(), &mut rng)
    }

    /// Tensors in canonical order with their names.
    pub fn named_tensors(&self) -> Vec<(String, &ParamTensor)> {
        fn push<'a>(out: &mut Vec<(String, &'a ParamTensor)>, prefix: &str, l: &'a Linear) {
            out.push((format!("{prefix}.weight"), &l.weight));
            out.push((format!("{prefix}.bias"), &l.bias));
        }
        let mut out = Vec::new();
        push(&mut out, "embedding", &self.embedding);
        for (i, b) in self.blocks.iter().enumerate() {
            for (name, l) in b.layers() {
                push(&mut out, &format!("blocks.{i}.{name}"), l);
            }
        }
        push(&mut out, "head", &self.head);
        out
    }

    pub fn tensors(&self) -> Vec<&ParamTensor> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out: Vec<&mut ParamTensor> = Vec::new();
        out.push(&mut self.embedding.weight);
        out.push(&mut self.embedding.bias);
        for b in &mut self.blocks {
            for l in b.layers_mut() {
                out.push(&mut l.weight);
                out.push(&mut l.bias);
            }
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for t in self.tensors_mut() {
            t.zero_grads();
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors()
            .into_iter()
            .flat_map(|t| t.values().iter().copied())
            .collect()
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.tensors()
            .into_iter()
            .flat_map(|t| t.grads().iter().copied())
            .collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        let expected = self.parameter_count();
        if values.len() != expected {
            return Err(Error::dim(
                "set_flat",
                format!("{expected} parameters"),
                format!("{} values", values.len()),
            ));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.values_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn head_names(policy: SplitPolicy) -> &'static [&'static str] {
        match policy {
            SplitPolicy::OutputHead => &["head.weight", "head.bias"],
            SplitPolicy::EmptyHead => &[],
        }
    }

    /// Splits into (base, head) under `policy`.
    pub fn split(&self, policy: SplitPolicy) -> (ParamSet, ParamSet) {
        let heads = Self::head_names(policy);
        let mut base = ParamSet::default();
        let mut head = ParamSet::default();
        for (name, t) in self.named_tensors() {
            let entry = NamedTensor {
                tensor: strip_grads(t),
                name,
            };
            if heads.contains(&entry.name.as_str()) {
                head.entries.push(entry);
            } else {
                base.entries.push(entry);
            }
        }
        (base, head)
    }

    /// Inverse of [`split`](Self::split); layouts must match this config.
    pub fn merge(config: &ModelConfig, base: &ParamSet, head: &ParamSet, policy: SplitPolicy) -> Result<Self> {
        let template = Self::layout_template(config)?;
        let (tb, th) = template.split(policy);
        if !tb.same_layout(base) {
            return Err(Error::dim("merge base", tb.describe_layout(), base.describe_layout()));
        }
        if !th.same_layout(head) {
            return Err(Error::dim("merge head", th.describe_layout(), head.describe_layout()));
        }
        let mut merged = template;
        let heads = Self::head_names(policy);
        let mut base_iter = base.entries.iter();
        let mut head_iter = head.entries.iter();
        let names: Vec<String> = merged.named_tensors().into_iter().map(|(n, _)| n).collect();
        for (name, t) in names.iter().zip(merged.tensors_mut()) {
            let src = if heads.contains(&name.as_str()) {
                head_iter.next()
            } else {
                base_iter.next()
            }
            .expect("layouts checked");
            t.values_mut().copy_from_slice(src.tensor.values());
        }
        Ok(merged)
    }

    /// Replaces the base part in place, keeping the head.
    pub fn set_base(&mut self, base: &ParamSet, policy: SplitPolicy) -> Result<()> {
        let (_, head) = self.split(policy);
        *self = Self::merge(&self.config, base, &head, policy)?;
        Ok(())
    }

    fn layout_template(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let z = |i: usize, o: usize| Linear {
            weight: ParamTensor::zeros(vec![i, o]),
            bias: ParamTensor::zeros(vec![o]),
        };
        Ok(Self {
            config: config.clone(),
            embedding: z(config.input_width(), config.d_emb),
            blocks: (0..config.blocks)
                .map(|_| Block {
                    query: z(config.d_emb, config.d_k),
                    key: z(config.d_emb, config.d_k),
                    value: z(config.d_emb, config.d_k),
                    output: z(config.d_k, config.d_emb),
                    ff_in: z(config.d_emb, config.d_ff),
                    ff_out: z(config.d_ff, config.d_emb),
                })
                .collect(),
            head: z(config.d_emb, config.horizon()),
        })
    }

    /// Builds a model from canonical-order named tensors.
    pub fn from_named(config: &ModelConfig, tensors: Vec<NamedTensor>) -> Result<Self> {
        let all = ParamSet { entries: tensors };
        Self::merge(config, &all, &ParamSet::default(), SplitPolicy::EmptyHead)
    }
}

fn strip_grads(t: &ParamTensor) -> ParamTensor {
    ParamTensor::new(t.shape().to_vec(), t.values().to_vec()).expect("shape preserved")
}
