use serde::{Deserialize, Serialize};

use crate::dataset::SLOTS_PER_DAY;
use crate::error::{Error, Result};

fn d_blocks() -> usize {
    2
}
fn d_emb() -> usize {
    32
}
fn d_k() -> usize {
    32
}
fn d_ff() -> usize {
    64
}
fn d_window() -> usize {
    3
}
fn d_lr() -> f64 {
    1e-3
}
fn d_epochs() -> usize {
    1
}
fn d_batch() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of stacked transformer blocks.
    #[serde(default = "d_blocks")]
    pub blocks: usize,
    #[serde(default = "d_emb")]
    pub d_emb: usize,
    #[serde(default = "d_k")]
    pub d_k: usize,
    /// Hidden width of the two-layer feed-forward.
    #[serde(default = "d_ff")]
    pub d_ff: usize,
    /// History days per input window, including the target day.
    #[serde(default = "d_window")]
    pub window_days: usize,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_epochs")]
    pub epochs_per_round: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            blocks: d_blocks(),
            d_emb: d_emb(),
            d_k: d_k(),
            d_ff: d_ff(),
            window_days: d_window(),
            learning_rate: d_lr(),
            epochs_per_round: d_epochs(),
            batch_size: d_batch(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("blocks", self.blocks),
            ("d_emb", self.d_emb),
            ("d_k", self.d_k),
            ("d_ff", self.d_ff),
            ("window_days", self.window_days),
            ("epochs_per_round", self.epochs_per_round),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("model {name} must be positive")));
            }
        }
        if self.d_k > self.d_emb {
            return Err(Error::Config(format!(
                "d_k ({}) must not exceed d_emb ({})",
                self.d_k, self.d_emb
            )));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        Ok(())
    }

    /// Values per input variate row.
    pub fn input_width(&self) -> usize {
        self.window_days * SLOTS_PER_DAY
    }

    pub fn horizon(&self) -> usize {
        SLOTS_PER_DAY
    }

    /// Parameter count from shapes alone.
    pub fn parameter_count(&self) -> usize {
        let linear = |i: usize, o: usize| i * o + o;
        let block = 3 * linear(self.d_emb, self.d_k)
            + linear(self.d_k, self.d_emb)
            + linear(self.d_emb, self.d_ff)
            + linear(self.d_ff, self.d_emb);
        linear(self.input_width(), self.d_emb) + self.blocks * block + self.head_parameter_count()
    }

    pub fn head_parameter_count(&self) -> usize {
        self.d_emb * self.horizon() + self.horizon()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelConfig::default().validate().unwrap();
    }

    #[test]
    fn d_k_bound() {
        let cfg = ModelConfig {
            d_k: 64,
            d_emb: 32,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn zero_fields_rejected() {
        let cfg = ModelConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
