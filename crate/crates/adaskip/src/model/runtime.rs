//! Exact token-by-token execution with a per-sublayer skip hook.
//!
//! Blocks are pre-norm: each sublayer reads the residual stream `a`,
//! computes `a + mix(norm(a))`, and that sum is the sublayer's output `b`.
//! Skipping replaces the whole sublayer, residual add included, with
//! `b = scale * a`. A skipped attention sublayer writes no KV entry, so a
//! later decision to execute it would find a gap in the cache; the runtime
//! rejects that instead of attending over misaligned history.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::kv::KvCache;
use crate::model::weights::ModelWeights;
use crate::tensor::{dot, matvec, rms_norm, scale_vector, silu, softmax_in_place};

const ROPE_BASE: f64 = 10000.0;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum SublayerKind {
    #[serde(rename = "attn")]
    Attention,
    #[serde(rename = "ffn")]
    Ffn,
}

impl fmt::Display for SublayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SublayerKind::Attention => "attn",
            SublayerKind::Ffn => "ffn",
        })
    }
}

/// One of the model's 2M skippable sublayers. Ordering is (layer, kind)
/// with attention before FFN, matching execution order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct SublayerRef {
    pub layer: usize,
    pub kind: SublayerKind,
}

impl SublayerRef {
    pub fn attn(layer: usize) -> Self {
        SublayerRef {
            layer,
            kind: SublayerKind::Attention,
        }
    }

    pub fn ffn(layer: usize) -> Self {
        SublayerRef {
            layer,
            kind: SublayerKind::Ffn,
        }
    }
}

impl fmt::Display for SublayerRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind, self.layer)
    }
}

impl FromStr for SublayerRef {
    type Err = Error;

    /// Parses `layer:kind`, e.g. `3:ffn`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("expected layer:kind, got {s:?}"));
        let (layer, kind) = s.split_once(':').ok_or_else(bad)?;
        let layer: usize = layer.trim().parse().map_err(|_| bad())?;
        let kind = match kind.trim() {
            "attn" => SublayerKind::Attention,
            "ffn" => SublayerKind::Ffn,
            _ => return Err(bad()),
        };
        Ok(SublayerRef { layer, kind })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Prefill,
    Decode,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Prefill => "prefill",
            Phase::Decode => "decode",
        })
    }
}

/// Residual stream snapshot around one executed sublayer.
#[derive(Debug, Clone)]
pub struct SublayerIo {
    pub sublayer: SublayerRef,
    pub phase: Phase,
    /// Token position within the full sequence.
    pub position: usize,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanResolution {
    Execute,
    /// Replace the sublayer with `scale * input`.
    Skip { scale: f64 },
}

/// Decides, token by token, which sublayers run, and sees the IO of each
/// one that does. Skipped sublayers are invisible to `observe`.
pub trait GenerateDriver {
    fn resolve(
        &mut self,
        sublayer: SublayerRef,
        phase: Phase,
        position: usize,
    ) -> Result<PlanResolution>;

    /// Called once per token before any sublayer of that token runs.
    fn begin_token(&mut self, phase: Phase, position: usize) -> Result<()> {
        let _ = (phase, position);
        Ok(())
    }

    fn observe(&mut self, io: &SublayerIo) -> Result<()> {
        let _ = io;
        Ok(())
    }
}

/// Driver for a static skip set, applied identically in both phases.
#[derive(Debug, Clone, Default)]
pub struct FixedPlanDriver {
    scales: BTreeMap<SublayerRef, f64>,
}

impl FixedPlanDriver {
    pub fn new(scales: BTreeMap<SublayerRef, f64>) -> Self {
        FixedPlanDriver { scales }
    }

    /// Runs every sublayer: the unmodified model.
    pub fn full() -> Self {
        FixedPlanDriver::default()
    }
}

impl GenerateDriver for FixedPlanDriver {
    fn resolve(
        &mut self,
        sublayer: SublayerRef,
        _phase: Phase,
        _position: usize,
    ) -> Result<PlanResolution> {
        Ok(match self.scales.get(&sublayer) {
            Some(&scale) => PlanResolution::Skip { scale },
            None => PlanResolution::Execute,
        })
    }
}

pub struct Model {
    pub weights: ModelWeights,
}

impl Model {
    pub fn new(weights: ModelWeights) -> Self {
        Model { weights }
    }

    pub fn config(&self) -> &crate::model::ModelConfig {
        &self.weights.config
    }

    /// Rotate query/key pairs in place by the position-dependent angle.
    fn apply_rope(&self, x: &mut [f64], position: usize) {
        let head_dim = self.config().head_dim();
        let pos = position as f64;
        for head in x.chunks_mut(head_dim) {
            for i in 0..head_dim / 2 {
                let theta = pos / ROPE_BASE.powf(2.0 * i as f64 / head_dim as f64);
                let (sin, cos) = theta.sin_cos();
                let a = head[2 * i];
                let b = head[2 * i + 1];
                head[2 * i] = a * cos - b * sin;
                head[2 * i + 1] = a * sin + b * cos;
            }
        }
    }

    fn attention_mix(
        &self,
        layer: usize,
        normed: &[f64],
        position: usize,
        kv: &mut KvCache,
    ) -> Result<Vec<f64>> {
        let cfg = self.config();
        let d = cfg.d_model;
        let head_dim = cfg.head_dim();
        let w = &self.weights.layers[layer];

        let filled = kv.filled(layer);
        if filled != position {
            return Err(Error::InconsistentPlan {
                sublayer: SublayerRef::attn(layer),
                position,
                filled,
            });
        }

        let mut q = matvec(&w.wq, normed);
        let mut k = matvec(&w.wk, normed);
        let v = matvec(&w.wv, normed);
        self.apply_rope(&mut q, position);
        self.apply_rope(&mut k, position);
        kv.push(layer, &k, &v);

        let keys = kv.keys(layer);
        let values = kv.values(layer);
        let n_pos = position + 1;
        let inv_sqrt = 1.0 / (head_dim as f64).sqrt();

        let mut mixed = vec![0.0; d];
        let mut scores = vec![0.0; n_pos];
        for h in 0..cfg.n_heads {
            let off = h * head_dim;
            let qh = &q[off..off + head_dim];
            for t in 0..n_pos {
                let kh = &keys[t * d + off..t * d + off + head_dim];
                scores[t] = dot(qh, kh) * inv_sqrt;
            }
            softmax_in_place(&mut scores);
            let out = &mut mixed[off..off + head_dim];
            for t in 0..n_pos {
                let vh = &values[t * d + off..t * d + off + head_dim];
                let p = scores[t];
                for j in 0..head_dim {
                    out[j] += p * vh[j];
                }
            }
        }
        Ok(matvec(&w.wo, &mixed))
    }

    fn ffn_mix(&self, layer: usize, normed: &[f64]) -> Vec<f64> {
        let w = &self.weights.layers[layer];
        let mut hidden = matvec(&w.w_up, normed);
        for v in hidden.iter_mut() {
            *v = silu(*v);
        }
        matvec(&w.w_down, &hidden)
    }

    /// Run one token through every block and return its logits. The token's
    /// position is the cache's `tokens_seen` before the call.
    pub fn forward_token(
        &self,
        token: u32,
        kv: &mut KvCache,
        phase: Phase,
        driver: &mut dyn GenerateDriver,
    ) -> Result<Vec<f64>> {
        let cfg = self.config();
        if token as usize >= cfg.vocab_size {
            return Err(Error::TokenOutOfVocab {
                token,
                vocab_size: cfg.vocab_size,
            });
        }
        let position = kv.tokens_seen();
        if position >= cfg.max_seq_len {
            return Err(Error::InvalidInput(format!(
                "sequence length {} exceeds max_seq_len {}",
                position + 1,
                cfg.max_seq_len
            )));
        }
        driver.begin_token(phase, position)?;

        let eps = cfg.norm_eps;
        let mut h = self.weights.embedding.row(token as usize).to_vec();
        for layer in 0..cfg.n_layers {
            let w = &self.weights.layers[layer];
            for kind in [SublayerKind::Attention, SublayerKind::Ffn] {
                let sublayer = SublayerRef { layer, kind };
                match driver.resolve(sublayer, phase, position)? {
                    PlanResolution::Skip { scale } => {
                        h = scale_vector(&h, scale);
                    }
                    PlanResolution::Execute => {
                        let input = h.clone();
                        let mix = match kind {
                            SublayerKind::Attention => {
                                let normed = rms_norm(&input, &w.attn_norm, eps);
                                self.attention_mix(layer, &normed, position, kv)?
                            }
                            SublayerKind::Ffn => {
                                let normed = rms_norm(&input, &w.ffn_norm, eps);
                                self.ffn_mix(layer, &normed)
                            }
                        };
                        for (hi, mi) in h.iter_mut().zip(&mix) {
                            *hi += mi;
                        }
                        driver.observe(&SublayerIo {
                            sublayer,
                            phase,
                            position,
                            input,
                            output: h.clone(),
                        })?;
                    }
                }
            }
        }
        kv.advance_token();

        let normed = rms_norm(&h, &self.weights.final_norm, eps);
        let mut logits = Vec::with_capacity(cfg.vocab_size);
        for t in 0..cfg.vocab_size {
            logits.push(dot(self.weights.embedding.row(t), &normed));
        }
        Ok(logits)
    }
}

/// Feed a prompt through the model, returning the last position's logits.
pub fn prefill(
    model: &Model,
    tokens: &[u32],
    kv: &mut KvCache,
    driver: &mut dyn GenerateDriver,
) -> Result<Vec<f64>> {
    if tokens.is_empty() {
        return Err(Error::InvalidInput("empty prompt".to_string()));
    }
    let mut logits = Vec::new();
    for &t in tokens {
        logits = model.forward_token(t, kv, Phase::Prefill, driver)?;
    }
    Ok(logits)
}

/// Greedy pick; ties resolve to the lowest token id so decoding is
/// deterministic across platforms.
pub fn argmax_logits(logits: &[f64]) -> u32 {
    assert!(!logits.is_empty(), "argmax of empty logits");
    let mut best = 0usize;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best as u32
}

#[derive(Debug, Clone)]
pub struct GenerateOutput {
    /// Emitted tokens, exactly `max_new` of them.
    pub tokens: Vec<u32>,
    /// Logits behind each emitted token, parallel to `tokens`.
    pub logits: Vec<Vec<f64>>,
}

/// Greedy generation: prefill the prompt, then decode `max_new` tokens.
///
/// The first emitted token comes from the prefill logits; each subsequent
/// token requires one decode-phase forward of the previous emission, so the
/// model performs `max_new - 1` decode steps. Generation is fixed-length:
/// an EOS emission is recorded like any other token. `max_new == 0` still
/// prefills (the usual case for time-to-first-token measurement) and emits
/// nothing.
pub fn generate(
    model: &Model,
    prompt: &[u32],
    max_new: usize,
    driver: &mut dyn GenerateDriver,
) -> Result<GenerateOutput> {
    let cfg = model.config();
    let total = prompt.len() + max_new.saturating_sub(1);
    if total > cfg.max_seq_len {
        return Err(Error::InvalidInput(format!(
            "prompt ({}) plus decode ({}) needs {} positions, max_seq_len is {}",
            prompt.len(),
            max_new - 1,
            total,
            cfg.max_seq_len
        )));
    }

    let mut kv = KvCache::new(cfg.n_layers, cfg.d_model);
    let first_logits = prefill(model, prompt, &mut kv, driver)?;
    if max_new == 0 {
        return Ok(GenerateOutput {
            tokens: Vec::new(),
            logits: Vec::new(),
        });
    }
    let mut tokens = vec![argmax_logits(&first_logits)];
    let mut logits = vec![first_logits];
    for _ in 1..max_new {
        let last = *tokens.last().unwrap();
        let l = model.forward_token(last, &mut kv, Phase::Decode, driver)?;
        tokens.push(argmax_logits(&l));
        logits.push(l);
    }
    Ok(GenerateOutput { tokens, logits })
}
