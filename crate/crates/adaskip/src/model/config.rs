use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::tokenizer::VOCAB_SIZE;

/// Architecture hyperparameters. Loaded from JSON and embedded next to the
/// weights' digest in profiles so mismatched artifacts are caught early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of transformer blocks (M). Each block has one attention and
    /// one FFN sublayer, so there are 2M skippable sublayers.
    pub n_layers: usize,
    /// Residual stream width.
    pub d_model: usize,
    /// Attention head count; must divide `d_model`.
    pub n_heads: usize,
    /// FFN hidden width.
    pub ffn_dim: usize,
    /// Token vocabulary size, including the two specials.
    pub vocab_size: usize,
    /// Longest sequence (prompt plus generated tokens) the model accepts.
    pub max_seq_len: usize,
    /// RMS-norm epsilon.
    pub norm_eps: f64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0
            || self.d_model == 0
            || self.n_heads == 0
            || self.ffn_dim == 0
            || self.max_seq_len == 0
        {
            return Err(Error::InvalidConfig(
                "all dimensions must be positive".to_string(),
            ));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::InvalidConfig(format!(
                "n_heads {} does not divide d_model {}",
                self.n_heads, self.d_model
            )));
        }
        let head_dim = self.d_model / self.n_heads;
        if head_dim % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "head dim {head_dim} must be even for rotary embedding"
            )));
        }
        if self.vocab_size != VOCAB_SIZE {
            return Err(Error::InvalidConfig(format!(
                "vocab_size must be {VOCAB_SIZE} (256 bytes + BOS + EOS), got {}",
                self.vocab_size
            )));
        }
        if !(self.norm_eps > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "norm_eps must be positive, got {}",
                self.norm_eps
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Skippable sublayer count, 2 per block.
    pub fn n_sublayers(&self) -> usize {
        2 * self.n_layers
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ModelConfig =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
