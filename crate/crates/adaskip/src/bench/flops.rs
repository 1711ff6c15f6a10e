//! Analytic FLOP accounting behind the `flop_ratio` speed proxy.
//!
//! Only sublayer matrix work is counted; embeddings, norms, and the logit
//! projection cost the same under every strategy and cancel out of the
//! ratio. The per-sublayer charges, with d the model width:
//!
//!   attention, prefill of length L:  4 d^2 L + 2 L^2 d
//!   attention, one decode token attending over L positions:  4 d^2 + 2 L d
//!   FFN, any token:  2 d ffn_dim per matrix, two matrices
//!
//! The first term of the attention charge is the four projections, the
//! second the score and mix products against every cached position.

use crate::model::{ModelConfig, SublayerKind};

pub fn attention_prefill_flops(d_model: usize, prompt_len: usize) -> f64 {
    let d = d_model as f64;
    let l = prompt_len as f64;
    4.0 * d * d * l + 2.0 * l * l * d
}

pub fn attention_decode_flops(d_model: usize, seq_len: usize) -> f64 {
    let d = d_model as f64;
    let l = seq_len as f64;
    4.0 * d * d + 2.0 * l * d
}

pub fn ffn_token_flops(d_model: usize, ffn_dim: usize) -> f64 {
    2.0 * d_model as f64 * ffn_dim as f64 * 2.0
}

/// Accumulates executed and full-model FLOPs side by side; their quotient
/// is the run's flop_ratio, 1.0 for an unskipped run.
#[derive(Debug, Clone)]
pub struct FlopLedger {
    d_model: usize,
    ffn_dim: usize,
    executed: f64,
    full: f64,
}

impl FlopLedger {
    pub fn new(config: &ModelConfig) -> Self {
        FlopLedger {
            d_model: config.d_model,
            ffn_dim: config.ffn_dim,
            executed: 0.0,
            full: 0.0,
        }
    }

    /// One sublayer's whole-prefill charge. Static plans skip a sublayer
    /// for all of prefill or none of it, so this is all-or-nothing.
    pub fn charge_prefill(&mut self, kind: SublayerKind, prompt_len: usize, executed: bool) {
        let cost = match kind {
            SublayerKind::Attention => attention_prefill_flops(self.d_model, prompt_len),
            SublayerKind::Ffn => ffn_token_flops(self.d_model, self.ffn_dim) * prompt_len as f64,
        };
        self.full += cost;
        if executed {
            self.executed += cost;
        }
    }

    /// One sublayer's charge for one decode token; `seq_len` counts every
    /// position attended, the new token included.
    pub fn charge_decode(&mut self, kind: SublayerKind, seq_len: usize, executed: bool) {
        let cost = match kind {
            SublayerKind::Attention => attention_decode_flops(self.d_model, seq_len),
            SublayerKind::Ffn => ffn_token_flops(self.d_model, self.ffn_dim),
        };
        self.full += cost;
        if executed {
            self.executed += cost;
        }
    }

    pub fn executed(&self) -> f64 {
        self.executed
    }

    pub fn full(&self) -> f64 {
        self.full
    }

    pub fn ratio(&self) -> f64 {
        if self.full == 0.0 {
            return 1.0;
        }
        self.executed / self.full
    }
}
