use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::model::runtime::{SublayerKind, SublayerRef};
use crate::tensor::Matrix;

/// Weights for one transformer block. Projection matrices are stored
/// (out_dim x in_dim) and applied as `W x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub attn_norm: Vec<f64>,
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    pub ffn_norm: Vec<f64>,
    /// (ffn_dim x d_model)
    pub w_up: Matrix,
    /// (d_model x ffn_dim)
    pub w_down: Matrix,
}

/// Full parameter set. Values are held as `f64` for arithmetic but are
/// always exactly representable as `f32`: initialization quantizes every
/// draw, so an in-memory model and its saved-and-reloaded copy are
/// bit-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub config: ModelConfig,
    /// (vocab_size x d_model); also used transposed for output logits.
    pub embedding: Matrix,
    pub layers: Vec<LayerWeights>,
    pub final_norm: Vec<f64>,
}

/// Next double in [0, 1) from the top 53 bits of a raw draw. Written out
/// rather than taken from a distributions crate so the byte stream behind a
/// given seed is pinned by this file alone.
fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * 2.0f64.powi(-53)
}

fn draw_tensor(rng: &mut ChaCha8Rng, len: usize, bound: f64) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let v = (2.0 * unit_f64(rng) - 1.0) * bound;
            (v as f32) as f64
        })
        .collect()
}

/// Deterministically initialize a model from a seed.
///
/// All learned matrices are uniform in `[-1/sqrt(d_model), 1/sqrt(d_model)]`;
/// norm gains start at 1.0 so freshly drawn blocks still transform their
/// input instead of collapsing toward the identity. Draw order is fixed:
/// embedding first, then per layer wq, wk, wv, wo, w_up, w_down.
pub fn init_model(config: &ModelConfig, seed: u64) -> Result<ModelWeights> {
    config.validate()?;
    let d = config.d_model;
    let bound = 1.0 / (d as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let embedding = Matrix::new(
        config.vocab_size,
        d,
        draw_tensor(&mut rng, config.vocab_size * d, bound),
    );
    let mut layers = Vec::with_capacity(config.n_layers);
    for _ in 0..config.n_layers {
        let wq = Matrix::new(d, d, draw_tensor(&mut rng, d * d, bound));
        let wk = Matrix::new(d, d, draw_tensor(&mut rng, d * d, bound));
        let wv = Matrix::new(d, d, draw_tensor(&mut rng, d * d, bound));
        let wo = Matrix::new(d, d, draw_tensor(&mut rng, d * d, bound));
        let w_up = Matrix::new(
            config.ffn_dim,
            d,
            draw_tensor(&mut rng, config.ffn_dim * d, bound),
        );
        let w_down = Matrix::new(
            d,
            config.ffn_dim,
            draw_tensor(&mut rng, d * config.ffn_dim, bound),
        );
        layers.push(LayerWeights {
            attn_norm: vec![1.0; d],
            wq,
            wk,
            wv,
            wo,
            ffn_norm: vec![1.0; d],
            w_up,
            w_down,
        });
    }
    Ok(ModelWeights {
        config: config.clone(),
        embedding,
        layers,
        final_norm: vec![1.0; d],
    })
}

/// Overwrite the listed sublayers with exact no-ops: attention keeps its
/// scores but contributes nothing to the residual (zero output projection),
/// an FFN is zeroed in both projections. The block then returns its input
/// unchanged, so its IO similarity is exactly 1 with scale 1.
pub fn plant_identity_sublayers(
    weights: &mut ModelWeights,
    targets: &[SublayerRef],
) -> Result<()> {
    for t in targets {
        let layer = weights.layers.get_mut(t.layer).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "plant target layer {} out of range (model has {})",
                t.layer,
                weights.config.n_layers
            ))
        })?;
        match t.kind {
            SublayerKind::Attention => {
                layer.wo.data.iter_mut().for_each(|v| *v = 0.0);
            }
            SublayerKind::Ffn => {
                layer.w_up.data.iter_mut().for_each(|v| *v = 0.0);
                layer.w_down.data.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }
    Ok(())
}

impl ModelWeights {
    /// Name -> (shape, values) for every tensor, in BTreeMap (sorted) order.
    /// This ordering defines payload layout on disk and the content digest.
    pub fn tensor_map(&self) -> BTreeMap<String, (Vec<usize>, &[f64])> {
        let mut map: BTreeMap<String, (Vec<usize>, &[f64])> = BTreeMap::new();
        map.insert(
            "embedding".to_string(),
            (
                vec![self.config.vocab_size, self.config.d_model],
                &self.embedding.data,
            ),
        );
        map.insert(
            "final_norm".to_string(),
            (vec![self.config.d_model], &self.final_norm),
        );
        for (i, l) in self.layers.iter().enumerate() {
            let d = self.config.d_model;
            let f = self.config.ffn_dim;
            map.insert(format!("layers.{i}.attn_norm"), (vec![d], &l.attn_norm));
            map.insert(format!("layers.{i}.wq"), (vec![d, d], &l.wq.data));
            map.insert(format!("layers.{i}.wk"), (vec![d, d], &l.wk.data));
            map.insert(format!("layers.{i}.wv"), (vec![d, d], &l.wv.data));
            map.insert(format!("layers.{i}.wo"), (vec![d, d], &l.wo.data));
            map.insert(format!("layers.{i}.ffn_norm"), (vec![d], &l.ffn_norm));
            map.insert(format!("layers.{i}.w_up"), (vec![f, d], &l.w_up.data));
            map.insert(format!("layers.{i}.w_down"), (vec![d, f], &l.w_down.data));
        }
        map
    }

    /// SHA-256 of the canonical serialized form, hex encoded. Identical for
    /// an in-memory model and the file it was saved to or loaded from.
    pub fn content_digest(&self) -> String {
        let bytes = crate::model::format::weights_to_bytes(self);
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        hex::encode(hasher.finalize())
    }
}
