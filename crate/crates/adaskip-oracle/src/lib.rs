//! Brute-force reference implementations for cross-checking `adaskip`.
//!
//! Everything here is recomputed from first principles: textbook loops,
//! collect-then-average statistics, full sorts. None of it shares arithmetic
//! with the production code it exists to check, so a bug has to appear twice
//! independently to slip through. Tolerances live in the tests, not here.
//!
//! These functions are test infrastructure. They panic on misuse (shape
//! mismatches, out-of-range requests) instead of returning errors; the
//! production error paths are asserted directly in the test suites.

use std::collections::{BTreeMap, BTreeSet};

use adaskip::model::{
    GenerateDriver, ModelWeights, Phase, PlanResolution, SublayerIo, SublayerKind, SublayerRef,
};
use adaskip::profiler::SimilarityProfile;
use adaskip::tensor::Matrix;

const ROPE_BASE: f64 = 10000.0;

/// Textbook i-j-k matrix product with explicit indexing.
pub fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols, b.rows, "naive_matmul: shape mismatch");
    let mut data = vec![0.0; a.rows * b.cols];
    for i in 0..a.rows {
        for j in 0..b.cols {
            let mut acc = 0.0;
            for k in 0..a.cols {
                acc += a.data[i * a.cols + k] * b.data[k * b.cols + j];
            }
            data[i * b.cols + j] = acc;
        }
    }
    Matrix::new(a.rows, b.cols, data)
}

fn naive_matvec(w: &Matrix, x: &[f64]) -> Vec<f64> {
    assert_eq!(w.cols, x.len(), "naive_matvec: shape mismatch");
    let mut out = vec![0.0; w.rows];
    for i in 0..w.rows {
        let mut acc = 0.0;
        for j in 0..w.cols {
            acc += w.data[i * w.cols + j] * x[j];
        }
        out[i] = acc;
    }
    out
}

/// Plain unclamped cosine. Panics on a zero-norm side.
pub fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "naive_cosine: length mismatch");
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(na > 0.0 && nb > 0.0, "naive_cosine: zero-norm vector");
    dot / (na * nb)
}

/// Output-to-input Euclidean norm ratio.
pub fn naive_norm_ratio(input: &[f64], output: &[f64]) -> f64 {
    let ni: f64 = input.iter().map(|x| x * x).sum::<f64>().sqrt();
    let no: f64 = output.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(ni > 0.0, "naive_norm_ratio: zero-norm input");
    no / ni
}

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "mean of nothing");
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Driver that executes everything and keeps a copy of every sublayer IO
/// snapshot, in execution order.
#[derive(Debug, Default)]
pub struct TraceRecorder {
    pub records: Vec<SublayerIo>,
}

impl GenerateDriver for TraceRecorder {
    fn resolve(
        &mut self,
        _sublayer: SublayerRef,
        _phase: Phase,
        _position: usize,
    ) -> adaskip::Result<PlanResolution> {
        Ok(PlanResolution::Execute)
    }

    fn observe(&mut self, io: &SublayerIo) -> adaskip::Result<()> {
        self.records.push(io.clone());
        Ok(())
    }
}

/// Per-sublayer (mean similarity, mean norm ratio, token count) over one
/// phase of a raw trace. Collects every per-token value first and averages
/// at the end, the opposite evaluation order from a running-sum profiler.
pub fn similarity_means(
    trace: &[SublayerIo],
    phase: Phase,
) -> BTreeMap<SublayerRef, (f64, f64, u64)> {
    let mut samples: BTreeMap<SublayerRef, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for io in trace {
        if io.phase != phase {
            continue;
        }
        let entry = samples.entry(io.sublayer).or_default();
        entry.0.push(naive_cosine(&io.input, &io.output));
        entry.1.push(naive_norm_ratio(&io.input, &io.output));
    }
    samples
        .into_iter()
        .map(|(s, (sims, scales))| {
            let n = sims.len() as u64;
            (s, (mean(&sims), mean(&scales), n))
        })
        .collect()
}

fn kind_rank(kind: SublayerKind) -> u8 {
    match kind {
        SublayerKind::Attention => 0,
        SublayerKind::Ffn => 1,
    }
}

/// The k most similar sublayers by full sort: descending mean similarity,
/// ties to the lower layer, attention before FFN. `kind` of `None` admits
/// both. Panics when k exceeds the filtered pool.
pub fn topk_by_similarity(
    profile: &SimilarityProfile,
    k: usize,
    kind: Option<SublayerKind>,
) -> Vec<SublayerRef> {
    let mut pool: Vec<(f64, usize, u8)> = profile
        .sublayers
        .iter()
        .filter(|e| kind.is_none() || kind == Some(e.kind))
        .map(|e| (e.mean_similarity, e.layer, kind_rank(e.kind)))
        .collect();
    assert!(k <= pool.len(), "topk_by_similarity: k exceeds pool");
    pool.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite similarity")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    pool.truncate(k);
    pool.into_iter()
        .map(|(_, layer, r)| {
            if r == 0 {
                SublayerRef::attn(layer)
            } else {
                SublayerRef::ffn(layer)
            }
        })
        .collect()
}

/// Set-overlap hit rate of a prediction against the profile's true top k.
pub fn set_hit_rate(
    predicted: &BTreeSet<SublayerRef>,
    actual: &SimilarityProfile,
    k: usize,
    kind: Option<SublayerKind>,
) -> f64 {
    assert!(k > 0, "set_hit_rate: k must be positive");
    let top: BTreeSet<SublayerRef> = topk_by_similarity(actual, k, kind).into_iter().collect();
    top.intersection(predicted).count() as f64 / k as f64
}

/// Brute-force minimum profiled similarity over a set of sublayers.
pub fn min_similarity(profile: &SimilarityProfile, over: &BTreeSet<SublayerRef>) -> f64 {
    assert!(!over.is_empty(), "min_similarity over an empty set");
    over.iter()
        .map(|s| {
            profile
                .entry(*s)
                .unwrap_or_else(|| panic!("profile misses {s}"))
                .mean_similarity
        })
        .fold(f64::INFINITY, f64::min)
}

/// Brute-force adaptive skip set: the offline skips plus every FFN whose
/// window mean strictly exceeds beta. Non-FFN window entries are ignored.
pub fn adaptive_skip_set(
    offline: &BTreeSet<SublayerRef>,
    beta: f64,
    window_means: &BTreeMap<SublayerRef, f64>,
) -> BTreeSet<SublayerRef> {
    let mut out = offline.clone();
    for (&sublayer, &m) in window_means {
        if sublayer.kind == SublayerKind::Ffn && !offline.contains(&sublayer) && m > beta {
            out.insert(sublayer);
        }
    }
    out
}

fn reference_rms_norm(x: &[f64], gain: &[f64], eps: f64) -> Vec<f64> {
    let mean_sq: f64 = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let denom = (mean_sq + eps).sqrt();
    x.iter().zip(gain).map(|(v, g)| v * g / denom).collect()
}

fn reference_rope(v: &[f64], position: usize, head_dim: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    for head in out.chunks_mut(head_dim) {
        for i in 0..head_dim / 2 {
            let freq = ROPE_BASE.powf(-(2.0 * i as f64) / head_dim as f64);
            let angle = position as f64 * freq;
            let (a, b) = (head[2 * i], head[2 * i + 1]);
            head[2 * i] = a * angle.cos() - b * angle.sin();
            head[2 * i + 1] = a * angle.sin() + b * angle.cos();
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One attention sublayer's output at the last given position, recomputed
/// per head from the residual inputs at every position so far. Keys and
/// values are rebuilt from scratch; nothing is cached.
pub fn attention_output(weights: &ModelWeights, layer: usize, inputs: &[Vec<f64>]) -> Vec<f64> {
    assert!(!inputs.is_empty(), "attention over no positions");
    let cfg = &weights.config;
    let (d, head_dim) = (cfg.d_model, cfg.head_dim());
    let w = &weights.layers[layer];
    let p = inputs.len() - 1;

    let keys: Vec<Vec<f64>> = inputs
        .iter()
        .enumerate()
        .map(|(t, x)| {
            let normed = reference_rms_norm(x, &w.attn_norm, cfg.norm_eps);
            reference_rope(&naive_matvec(&w.wk, &normed), t, head_dim)
        })
        .collect();
    let values: Vec<Vec<f64>> = inputs
        .iter()
        .map(|x| naive_matvec(&w.wv, &reference_rms_norm(x, &w.attn_norm, cfg.norm_eps)))
        .collect();
    let normed_p = reference_rms_norm(&inputs[p], &w.attn_norm, cfg.norm_eps);
    let q = reference_rope(&naive_matvec(&w.wq, &normed_p), p, head_dim);

    let mut mixed = vec![0.0; d];
    for h in 0..cfg.n_heads {
        let off = h * head_dim;
        let logits: Vec<f64> = (0..=p)
            .map(|t| {
                let mut score = 0.0;
                for j in 0..head_dim {
                    score += q[off + j] * keys[t][off + j];
                }
                score / (head_dim as f64).sqrt()
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for t in 0..=p {
            let weight = exps[t] / total;
            for j in 0..head_dim {
                mixed[off + j] += weight * values[t][off + j];
            }
        }
    }

    let projected = naive_matvec(&w.wo, &mixed);
    inputs[p].iter().zip(&projected).map(|(a, b)| a + b).collect()
}

/// One FFN sublayer's output for a residual input, recomputed directly.
pub fn ffn_output(weights: &ModelWeights, layer: usize, input: &[f64]) -> Vec<f64> {
    let cfg = &weights.config;
    let w = &weights.layers[layer];
    let normed = reference_rms_norm(input, &w.ffn_norm, cfg.norm_eps);
    let gated: Vec<f64> = naive_matvec(&w.w_up, &normed)
        .into_iter()
        .map(|x| x * sigmoid(x))
        .collect();
    let projected = naive_matvec(&w.w_down, &gated);
    input.iter().zip(&projected).map(|(a, b)| a + b).collect()
}

/// Pinned per-sublayer FLOP formulas, written out as plain products.
pub fn prefill_attention_flops(d: usize, prompt_len: usize) -> f64 {
    (4 * d * d * prompt_len) as f64 + (2 * prompt_len * prompt_len * d) as f64
}

pub fn decode_attention_flops(d: usize, attended: usize) -> f64 {
    (4 * d * d) as f64 + (2 * attended * d) as f64
}

pub fn ffn_flops(d: usize, ffn_dim: usize, tokens: usize) -> f64 {
    (4 * d * ffn_dim * tokens) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_matmul_hand_example() {
        let a = Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let b = Matrix::new(2, 2, vec![5.0, 6.0, 7.0, 8.0]);
        let c = naive_matmul(&a, &b);
        assert_eq!(c.data, vec![19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn adaptive_set_filters_kind_membership_and_threshold() {
        let offline = BTreeSet::from([SublayerRef::ffn(0)]);
        let means = BTreeMap::from([
            (SublayerRef::ffn(0), 0.99), // already offline
            (SublayerRef::ffn(1), 0.80), // above beta: extends
            (SublayerRef::ffn(2), 0.50), // equal to beta: stays
            (SublayerRef::attn(3), 0.99), // attention never extends
        ]);
        let got = adaptive_skip_set(&offline, 0.5, &means);
        assert_eq!(
            got,
            BTreeSet::from([SublayerRef::ffn(0), SublayerRef::ffn(1)])
        );
    }

    #[test]
    fn mean_is_collect_then_average() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
    }
}
