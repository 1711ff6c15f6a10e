//! The toy decoder-only transformer: configuration, weights, on-disk
//! format, tokenizer, KV cache, and the exact token-by-token runtime.

mod config;
mod format;
mod kv;
mod runtime;
mod tokenizer;
mod weights;

pub use config::ModelConfig;
pub use format::{load_weights, save_weights};
pub use kv::KvCache;
pub use runtime::{
    argmax_logits, generate, prefill, FixedPlanDriver, GenerateDriver, GenerateOutput, Model,
    Phase, PlanResolution, SublayerIo, SublayerKind, SublayerRef,
};
pub use tokenizer::{decode_bytes, encode_prompt, BOS_TOKEN, EOS_TOKEN, VOCAB_SIZE};
pub use weights::{init_model, plant_identity_sublayers, ModelWeights};
