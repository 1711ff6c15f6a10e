//! Quality and transfer metrics: top-k overlap between profiles and
//! logit-level divergence from the full model.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{argmax_logits, prefill, FixedPlanDriver, KvCache, Model, Phase, SublayerRef};
use crate::policy::ranked_sublayers;
use crate::profiler::SimilarityProfile;
use crate::tensor::cosine_similarity;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindFilter {
    Attention,
    Ffn,
    Both,
}

impl KindFilter {
    fn admits(self, sublayer: SublayerRef) -> bool {
        match self {
            KindFilter::Attention => sublayer.kind == crate::model::SublayerKind::Attention,
            KindFilter::Ffn => sublayer.kind == crate::model::SublayerKind::Ffn,
            KindFilter::Both => true,
        }
    }
}

impl fmt::Display for KindFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KindFilter::Attention => "attn",
            KindFilter::Ffn => "ffn",
            KindFilter::Both => "both",
        })
    }
}

impl FromStr for KindFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attn" => Ok(KindFilter::Attention),
            "ffn" => Ok(KindFilter::Ffn),
            "both" => Ok(KindFilter::Both),
            _ => Err(Error::InvalidInput(format!("unknown kind filter {s:?}"))),
        }
    }
}

/// The k most input-similar sublayers of one kind (or both), with the same
/// descending-similarity, lowest-sublayer-first ordering plans use.
pub fn top_k(
    profile: &SimilarityProfile,
    k: usize,
    filter: KindFilter,
) -> Result<BTreeSet<SublayerRef>> {
    let ranked: Vec<SublayerRef> = ranked_sublayers(profile)
        .into_iter()
        .map(|e| e.sublayer())
        .filter(|s| filter.admits(*s))
        .collect();
    if k > ranked.len() {
        return Err(Error::InvalidK {
            k,
            reason: format!("only {} {filter} sublayers available", ranked.len()),
        });
    }
    Ok(ranked.into_iter().take(k).collect())
}

/// Fraction of the actual profile's top k that the prediction found.
pub fn hit_rate(
    predicted: &BTreeSet<SublayerRef>,
    actual: &SimilarityProfile,
    k: usize,
    filter: KindFilter,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidK {
            k,
            reason: "k must be positive".to_string(),
        });
    }
    let actual_topk = top_k(actual, k, filter)?;
    let hits = actual_topk.intersection(predicted).count();
    Ok(hits as f64 / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceReport {
    /// Fraction of emission steps where the full model, fed the same
    /// history, would have picked the same token.
    pub top1_agreement: f64,
    pub mean_logit_cosine: f64,
}

/// Step-wise logit comparison of a run against its full-model reference.
/// Traces must pair up one-to-one; identical traces score exactly
/// (1.0, 1.0). Empty traces are vacuously in agreement.
pub fn divergence(reference: &[Vec<f64>], candidate: &[Vec<f64>]) -> Result<DivergenceReport> {
    if reference.len() != candidate.len() {
        return Err(Error::InvalidInput(format!(
            "divergence over {} reference steps vs {} candidate steps",
            reference.len(),
            candidate.len()
        )));
    }
    if reference.is_empty() {
        return Ok(DivergenceReport {
            top1_agreement: 1.0,
            mean_logit_cosine: 1.0,
        });
    }
    let mut agree = 0usize;
    let mut cosine_sum = 0.0;
    for (r, c) in reference.iter().zip(candidate) {
        if argmax_logits(r) == argmax_logits(c) {
            agree += 1;
        }
        // Bitwise-equal steps are exactly 1 by definition, sidestepping
        // rounding in the norm products.
        cosine_sum += if r == c {
            1.0
        } else {
            cosine_similarity(r, c)?
        };
    }
    let steps = reference.len() as f64;
    Ok(DivergenceReport {
        top1_agreement: agree as f64 / steps,
        mean_logit_cosine: cosine_sum / steps,
    })
}

/// Full-model logits for a forced token sequence: the reference side of a
/// divergence measurement. Step i's logits condition on the prompt plus
/// `emitted[..i]`, exactly the history the candidate run saw.
pub fn teacher_forced_logits(
    model: &Model,
    prompt: &[u32],
    emitted: &[u32],
) -> Result<Vec<Vec<f64>>> {
    if emitted.is_empty() {
        return Ok(Vec::new());
    }
    let cfg = model.config();
    let mut driver = FixedPlanDriver::full();
    let mut kv = KvCache::new(cfg.n_layers, cfg.d_model);
    let mut logits = Vec::with_capacity(emitted.len());
    logits.push(prefill(model, prompt, &mut kv, &mut driver)?);
    for &token in &emitted[..emitted.len() - 1] {
        logits.push(model.forward_token(token, &mut kv, Phase::Decode, &mut driver)?);
    }
    Ok(logits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{encode_prompt, generate, init_model, ModelConfig, SublayerKind, VOCAB_SIZE};
    use crate::profiler::ProfileEntry;

    fn profile(sims: &[(f64, f64)]) -> SimilarityProfile {
        let mut sublayers = Vec::new();
        for (layer, &(attn, ffn)) in sims.iter().enumerate() {
            for (kind, sim) in [(SublayerKind::Attention, attn), (SublayerKind::Ffn, ffn)] {
                sublayers.push(ProfileEntry {
                    layer,
                    kind,
                    mean_similarity: sim,
                    mean_scale: 1.0,
                    token_count: 5,
                });
            }
        }
        SimilarityProfile {
            model_id: "m".to_string(),
            phase: Phase::Prefill,
            task_count: 1,
            sublayers,
            source_task_ids: vec!["t".to_string()],
        }
    }

    #[test]
    fn top_k_respects_kind_filters_and_ties() {
        let p = profile(&[(0.9, 0.9), (0.1, 0.8)]);
        assert_eq!(
            top_k(&p, 2, KindFilter::Both).unwrap(),
            BTreeSet::from([SublayerRef::attn(0), SublayerRef::ffn(0)])
        );
        assert_eq!(
            top_k(&p, 1, KindFilter::Ffn).unwrap(),
            BTreeSet::from([SublayerRef::ffn(0)])
        );
        assert_eq!(
            top_k(&p, 2, KindFilter::Attention).unwrap(),
            BTreeSet::from([SublayerRef::attn(0), SublayerRef::attn(1)])
        );
        assert!(matches!(
            top_k(&p, 3, KindFilter::Ffn),
            Err(Error::InvalidK { k: 3, .. })
        ));
    }

    #[test]
    fn hit_rate_counts_overlap() {
        let p = profile(&[(0.9, 0.9), (0.1, 0.8)]);
        // Actual top-2 (both kinds) is {attn@0, ffn@0}.
        let predicted = BTreeSet::from([SublayerRef::attn(0), SublayerRef::ffn(1)]);
        assert_eq!(hit_rate(&predicted, &p, 2, KindFilter::Both).unwrap(), 0.5);
        let exact = BTreeSet::from([SublayerRef::attn(0), SublayerRef::ffn(0)]);
        assert_eq!(hit_rate(&exact, &p, 2, KindFilter::Both).unwrap(), 1.0);
        assert_eq!(
            hit_rate(&BTreeSet::new(), &p, 2, KindFilter::Both).unwrap(),
            0.0
        );
        assert!(hit_rate(&exact, &p, 0, KindFilter::Both).is_err());
    }

    #[test]
    fn identical_traces_diverge_not_at_all() {
        let trace = vec![vec![0.3, -0.7, 1.2], vec![5.0, 5.0, 0.1]];
        let d = divergence(&trace, &trace.clone()).unwrap();
        assert_eq!(d.top1_agreement, 1.0);
        assert_eq!(d.mean_logit_cosine, 1.0);
        let empty = divergence(&[], &[]).unwrap();
        assert_eq!(empty.top1_agreement, 1.0);
        assert_eq!(empty.mean_logit_cosine, 1.0);
    }

    #[test]
    fn divergent_steps_are_counted() {
        let reference = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let candidate = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let d = divergence(&reference, &candidate).unwrap();
        assert_eq!(d.top1_agreement, 0.5);
        // Step cosines: 1.0 and 0.0.
        assert!((d.mean_logit_cosine - 0.5).abs() < 1e-15);
        assert!(divergence(&reference, &candidate[..1]).is_err());
    }

    #[test]
    fn teacher_forcing_the_models_own_output_reproduces_its_logits() {
        let config = ModelConfig {
            n_layers: 2,
            d_model: 8,
            n_heads: 2,
            ffn_dim: 16,
            vocab_size: VOCAB_SIZE,
            max_seq_len: 64,
            norm_eps: 1e-5,
        };
        let model = Model::new(init_model(&config, 7).unwrap());
        let prompt = encode_prompt("teach");
        let out = generate(&model, &prompt, 4, &mut FixedPlanDriver::full()).unwrap();
        let reference = teacher_forced_logits(&model, &prompt, &out.tokens).unwrap();
        assert_eq!(reference, out.logits);
        assert!(teacher_forced_logits(&model, &prompt, &[]).unwrap().is_empty());
    }
}
