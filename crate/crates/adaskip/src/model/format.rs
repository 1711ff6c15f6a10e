//! Weight file container.
//!
//! Layout: magic `ADSK`, format version (u32 LE), header length (u64 LE),
//! a UTF-8 JSON header mapping tensor name to shape/dtype/offset, then one
//! contiguous little-endian f32 payload. Offsets are byte positions
//! relative to the payload start and are assigned in sorted-name order, so
//! the writer is canonical: saving the same weights twice yields the same
//! bytes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::model::weights::{LayerWeights, ModelWeights};
use crate::tensor::Matrix;

const MAGIC: &[u8; 4] = b"ADSK";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorMeta {
    shape: Vec<usize>,
    dtype: String,
    offset: u64,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::WeightFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Canonical serialization used by both [`save_weights`] and the content
/// digest.
pub fn weights_to_bytes(weights: &ModelWeights) -> Vec<u8> {
    let tensors = weights.tensor_map();
    let mut header: BTreeMap<String, TensorMeta> = BTreeMap::new();
    let mut offset = 0u64;
    for (name, (shape, data)) in &tensors {
        header.insert(
            name.clone(),
            TensorMeta {
                shape: shape.clone(),
                dtype: "f32".to_string(),
                offset,
            },
        );
        offset += (data.len() * 4) as u64;
    }
    let header_bytes = serde_json::to_vec(&header).expect("header serialization");

    let mut out = Vec::with_capacity(16 + header_bytes.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for (_, (_, data)) in &tensors {
        for &v in *data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn save_weights(path: &Path, weights: &ModelWeights) -> Result<()> {
    crate::write_atomic(path, &weights_to_bytes(weights))
}

fn read_tensor(
    path: &Path,
    payload: &[u8],
    header: &BTreeMap<String, TensorMeta>,
    name: &str,
    expect_shape: &[usize],
) -> Result<Vec<f64>> {
    let meta = header
        .get(name)
        .ok_or_else(|| format_err(path, format!("missing tensor {name}")))?;
    if meta.dtype != "f32" {
        return Err(format_err(
            path,
            format!("tensor {name} has dtype {}, expected f32", meta.dtype),
        ));
    }
    if meta.shape != expect_shape {
        return Err(format_err(
            path,
            format!(
                "tensor {name} has shape {:?}, expected {:?}",
                meta.shape, expect_shape
            ),
        ));
    }
    let len: usize = expect_shape.iter().product();
    let start = meta.offset as usize;
    let end = start
        .checked_add(len * 4)
        .ok_or_else(|| format_err(path, format!("tensor {name} offset overflow")))?;
    if end > payload.len() {
        return Err(format_err(
            path,
            format!("tensor {name} extends past payload end"),
        ));
    }
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let b: [u8; 4] = payload[start + 4 * i..start + 4 * i + 4]
            .try_into()
            .unwrap();
        out.push(f32::from_le_bytes(b) as f64);
    }
    Ok(out)
}

/// Load and validate a weight file against the given architecture. The name
/// set must match the architecture exactly; extra tensors are rejected.
pub fn load_weights(path: &Path, config: &ModelConfig) -> Result<ModelWeights> {
    config.validate()?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 {
        return Err(format_err(path, "file shorter than fixed header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(format_err(path, "bad magic, not a weight file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(format_err(
            path,
            format!("unsupported format version {version}, expected {VERSION}"),
        ));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let payload_start = 16usize
        .checked_add(header_len)
        .ok_or_else(|| format_err(path, "header length overflow"))?;
    if payload_start > bytes.len() {
        return Err(format_err(path, "header extends past end of file"));
    }
    let header: BTreeMap<String, TensorMeta> =
        serde_json::from_slice(&bytes[16..payload_start])
            .map_err(|e| format_err(path, format!("header is not valid JSON: {e}")))?;
    let payload = &bytes[payload_start..];
    let expected_payload: usize = header
        .values()
        .map(|m| m.shape.iter().product::<usize>() * 4)
        .sum();
    if payload.len() != expected_payload {
        return Err(format_err(
            path,
            format!(
                "payload is {} bytes, header describes {}",
                payload.len(),
                expected_payload
            ),
        ));
    }

    let d = config.d_model;
    let f = config.ffn_dim;
    let mut expected_names: Vec<String> = vec!["embedding".into(), "final_norm".into()];
    for i in 0..config.n_layers {
        for t in ["attn_norm", "wq", "wk", "wv", "wo", "ffn_norm", "w_up", "w_down"] {
            expected_names.push(format!("layers.{i}.{t}"));
        }
    }
    for name in header.keys() {
        if !expected_names.iter().any(|n| n == name) {
            return Err(format_err(path, format!("unexpected tensor {name}")));
        }
    }

    let embedding = Matrix::new(
        config.vocab_size,
        d,
        read_tensor(path, payload, &header, "embedding", &[config.vocab_size, d])?,
    );
    let final_norm = read_tensor(path, payload, &header, "final_norm", &[d])?;
    let mut layers = Vec::with_capacity(config.n_layers);
    for i in 0..config.n_layers {
        let get = |t: &str, shape: &[usize]| {
            read_tensor(path, payload, &header, &format!("layers.{i}.{t}"), shape)
        };
        layers.push(LayerWeights {
            attn_norm: get("attn_norm", &[d])?,
            wq: Matrix::new(d, d, get("wq", &[d, d])?),
            wk: Matrix::new(d, d, get("wk", &[d, d])?),
            wv: Matrix::new(d, d, get("wv", &[d, d])?),
            wo: Matrix::new(d, d, get("wo", &[d, d])?),
            ffn_norm: get("ffn_norm", &[d])?,
            w_up: Matrix::new(f, d, get("w_up", &[f, d])?),
            w_down: Matrix::new(d, f, get("w_down", &[d, f])?),
        });
    }
    Ok(ModelWeights {
        config: config.clone(),
        embedding,
        layers,
        final_norm,
    })
}
