//! Offline importance measurement.
//!
//! For every executed sublayer the profiler records two numbers per token:
//! the cosine similarity between the sublayer's input and output, and the
//! output/input norm ratio. Means are pooled over every token of every
//! calibration task, so merging shard profiles weighted by token count
//! reproduces the union profile. High mean similarity marks a sublayer
//! whose work barely rotates the residual stream; its mean norm ratio is
//! the compensation scale to use when skipping it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::Task;
use crate::error::{Error, Result};
use crate::model::{
    generate, GenerateDriver, Model, Phase, PlanResolution, SublayerIo, SublayerKind,
    SublayerRef,
};
use crate::tensor::{cosine_similarity, l2_norm};

/// Running sums for one sublayer. Kept as sums, not means, so recording
/// stays O(1) and finalization divides once.
#[derive(Debug, Clone, Default)]
pub struct SublayerStats {
    sum_similarity: f64,
    sum_scale: f64,
    tokens: u64,
}

impl SublayerStats {
    pub fn record(&mut self, input: &[f64], output: &[f64]) -> Result<()> {
        let sim = cosine_similarity(input, output)?;
        let scale = l2_norm(output) / l2_norm(input);
        self.sum_similarity += sim;
        self.sum_scale += scale;
        self.tokens += 1;
        Ok(())
    }

    pub fn tokens(&self) -> u64 {
        self.tokens
    }

    /// (mean similarity, mean scale, token count).
    pub fn finalize(&self) -> Result<(f64, f64, u64)> {
        if self.tokens == 0 {
            return Err(Error::EmptyStats);
        }
        let n = self.tokens as f64;
        Ok((self.sum_similarity / n, self.sum_scale / n, self.tokens))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub layer: usize,
    pub kind: SublayerKind,
    pub mean_similarity: f64,
    pub mean_scale: f64,
    pub token_count: u64,
}

impl ProfileEntry {
    pub fn sublayer(&self) -> SublayerRef {
        SublayerRef {
            layer: self.layer,
            kind: self.kind,
        }
    }
}

/// One phase's importance profile for one model. `sublayers` is complete
/// and sorted by (layer, kind): every block contributes an attention and
/// an FFN entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityProfile {
    /// Content digest of the weights this profile was measured on.
    pub model_id: String,
    pub phase: Phase,
    pub task_count: u64,
    pub sublayers: Vec<ProfileEntry>,
    /// Ids of the calibration tasks, for disjointness checks downstream.
    pub source_task_ids: Vec<String>,
}

impl SimilarityProfile {
    /// Block count implied by the entries.
    pub fn n_layers(&self) -> usize {
        self.sublayers.len() / 2
    }

    /// The merge identity: a profile over zero tasks and zero tokens.
    /// Not valid on its own, but merging it into anything changes nothing.
    pub fn empty(model_id: &str, phase: Phase, n_layers: usize) -> SimilarityProfile {
        let mut sublayers = Vec::with_capacity(2 * n_layers);
        for layer in 0..n_layers {
            for kind in [SublayerKind::Attention, SublayerKind::Ffn] {
                sublayers.push(ProfileEntry {
                    layer,
                    kind,
                    mean_similarity: 0.0,
                    mean_scale: 1.0,
                    token_count: 0,
                });
            }
        }
        SimilarityProfile {
            model_id: model_id.to_string(),
            phase,
            task_count: 0,
            sublayers,
            source_task_ids: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.check(false)
    }

    fn check(&self, allow_empty: bool) -> Result<()> {
        if self.sublayers.is_empty() {
            return Err(Error::IncompleteProfile("no sublayer entries".to_string()));
        }
        if self.sublayers.len() % 2 != 0 {
            return Err(Error::IncompleteProfile(format!(
                "{} entries cannot cover attention/FFN pairs",
                self.sublayers.len()
            )));
        }
        let n_layers = self.sublayers.len() / 2;
        for (i, e) in self.sublayers.iter().enumerate() {
            let expect = SublayerRef {
                layer: i / 2,
                kind: if i % 2 == 0 {
                    SublayerKind::Attention
                } else {
                    SublayerKind::Ffn
                },
            };
            if e.sublayer() != expect {
                return Err(Error::IncompleteProfile(format!(
                    "entry {i} is {}, expected {expect} (layers 0..{n_layers}, \
                     attention then ffn, sorted)",
                    e.sublayer()
                )));
            }
            if !(-1.0..=1.0).contains(&e.mean_similarity) {
                return Err(Error::InvalidInput(format!(
                    "{}: mean_similarity {} outside [-1, 1]",
                    e.sublayer(),
                    e.mean_similarity
                )));
            }
            if !(e.mean_scale.is_finite() && e.mean_scale > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{}: mean_scale {} must be finite and positive",
                    e.sublayer(),
                    e.mean_scale
                )));
            }
            if e.token_count == 0 && !allow_empty {
                return Err(Error::EmptyStats);
            }
        }
        if self.task_count == 0 && !allow_empty {
            return Err(Error::IncompleteProfile("task_count is zero".to_string()));
        }
        if self.source_task_ids.len() as u64 != self.task_count {
            return Err(Error::IncompleteProfile(format!(
                "task_count {} but {} source task ids",
                self.task_count,
                self.source_task_ids.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &self.source_task_ids {
            if !seen.insert(id) {
                return Err(Error::IncompleteProfile(format!(
                    "duplicate source task id {id:?}"
                )));
            }
        }
        Ok(())
    }

    /// Canonical serialized form; identical bytes for identical profiles.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("profile serialization");
        bytes.push(b'\n');
        bytes
    }

    /// SHA-256 of the canonical form, hex encoded. Plans embed this to pin
    /// the profile they were derived from.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_bytes());
        hex::encode(hasher.finalize())
    }

    pub fn entry(&self, sublayer: SublayerRef) -> Option<&ProfileEntry> {
        self.sublayers.iter().find(|e| e.sublayer() == sublayer)
    }
}

pub fn save_profile(path: &Path, profile: &SimilarityProfile) -> Result<()> {
    profile.validate()?;
    crate::write_atomic(path, &profile.canonical_bytes())
}

pub fn load_profile(path: &Path) -> Result<SimilarityProfile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let profile: SimilarityProfile =
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    profile.validate()?;
    Ok(profile)
}

/// Pool shard profiles into one, weighting each mean by its token count.
/// Shards must describe the same model and phase over disjoint task sets.
/// Zero-token shards (see `SimilarityProfile::empty`) are permitted and
/// contribute nothing.
pub fn merge_profiles(shards: &[SimilarityProfile]) -> Result<SimilarityProfile> {
    let first = shards
        .first()
        .ok_or_else(|| Error::InvalidInput("no profiles to merge".to_string()))?;
    for s in shards {
        s.check(true)?;
        if s.model_id != first.model_id {
            return Err(Error::ProfileMismatch(format!(
                "model {} vs {}",
                s.model_id, first.model_id
            )));
        }
        if s.phase != first.phase {
            return Err(Error::ProfileMismatch(format!(
                "phase {} vs {}",
                s.phase, first.phase
            )));
        }
        if s.sublayers.len() != first.sublayers.len() {
            return Err(Error::ProfileMismatch(format!(
                "{} vs {} sublayer entries",
                s.sublayers.len(),
                first.sublayers.len()
            )));
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut dupes = Vec::new();
    for s in shards {
        for id in &s.source_task_ids {
            if !seen.insert(id.clone()) {
                dupes.push(id.clone());
            }
        }
    }
    if !dupes.is_empty() {
        return Err(Error::CalibrationOverlap(dupes));
    }

    let mut sublayers = Vec::with_capacity(first.sublayers.len());
    for i in 0..first.sublayers.len() {
        let mut sum_sim = 0.0;
        let mut sum_scale = 0.0;
        let mut tokens = 0u64;
        for s in shards {
            let e = &s.sublayers[i];
            let n = e.token_count as f64;
            sum_sim += e.mean_similarity * n;
            sum_scale += e.mean_scale * n;
            tokens += e.token_count;
        }
        // All shards empty leaves the identity entry unchanged.
        let (mean_similarity, mean_scale) = if tokens == 0 {
            (0.0, 1.0)
        } else {
            let n = tokens as f64;
            ((sum_sim / n).clamp(-1.0, 1.0), sum_scale / n)
        };
        sublayers.push(ProfileEntry {
            layer: first.sublayers[i].layer,
            kind: first.sublayers[i].kind,
            mean_similarity,
            mean_scale,
            token_count: tokens,
        });
    }
    Ok(SimilarityProfile {
        model_id: first.model_id.clone(),
        phase: first.phase,
        task_count: shards.iter().map(|s| s.task_count).sum(),
        sublayers,
        source_task_ids: shards
            .iter()
            .flat_map(|s| s.source_task_ids.iter().cloned())
            .collect(),
    })
}

/// Driver that runs the full model and accumulates IO statistics per phase.
/// It never skips anything, so a profiled generation emits exactly the
/// tokens the plain model would.
#[derive(Debug, Default)]
pub struct ProfileCollector {
    prefill: BTreeMap<SublayerRef, SublayerStats>,
    decode: BTreeMap<SublayerRef, SublayerStats>,
}

impl ProfileCollector {
    pub fn new() -> Self {
        Self::default()
    }

    fn phase_map(&self, phase: Phase) -> &BTreeMap<SublayerRef, SublayerStats> {
        match phase {
            Phase::Prefill => &self.prefill,
            Phase::Decode => &self.decode,
        }
    }

    /// Build the finished profile for one phase.
    pub fn into_profile(
        &self,
        model: &Model,
        phase: Phase,
        task_ids: &[String],
    ) -> Result<SimilarityProfile> {
        let map = self.phase_map(phase);
        let mut sublayers = Vec::with_capacity(model.config().n_sublayers());
        for layer in 0..model.config().n_layers {
            for kind in [SublayerKind::Attention, SublayerKind::Ffn] {
                let sublayer = SublayerRef { layer, kind };
                let stats = map.get(&sublayer).ok_or(Error::EmptyStats)?;
                let (mean_similarity, mean_scale, token_count) = stats.finalize()?;
                sublayers.push(ProfileEntry {
                    layer,
                    kind,
                    mean_similarity,
                    mean_scale,
                    token_count,
                });
            }
        }
        let profile = SimilarityProfile {
            model_id: model.weights.content_digest(),
            phase,
            task_count: task_ids.len() as u64,
            sublayers,
            source_task_ids: task_ids.to_vec(),
        };
        profile.validate()?;
        Ok(profile)
    }
}

impl GenerateDriver for ProfileCollector {
    fn resolve(
        &mut self,
        _sublayer: SublayerRef,
        _phase: Phase,
        _position: usize,
    ) -> Result<PlanResolution> {
        Ok(PlanResolution::Execute)
    }

    fn observe(&mut self, io: &SublayerIo) -> Result<()> {
        let map = match io.phase {
            Phase::Prefill => &mut self.prefill,
            Phase::Decode => &mut self.decode,
        };
        map.entry(io.sublayer)
            .or_default()
            .record(&io.input, &io.output)
    }
}

/// Which phases a profiling run should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileRequest {
    Prefill,
    Decode,
    Both,
}

impl ProfileRequest {
    pub fn wants_prefill(self) -> bool {
        matches!(self, ProfileRequest::Prefill | ProfileRequest::Both)
    }

    pub fn wants_decode(self) -> bool {
        matches!(self, ProfileRequest::Decode | ProfileRequest::Both)
    }
}

#[derive(Debug, Clone)]
pub struct ProfileBundle {
    pub prefill: Option<SimilarityProfile>,
    pub decode: Option<SimilarityProfile>,
}

/// Run the full model over the calibration tasks and measure IO statistics.
///
/// Decode statistics come from `decode_len` greedily generated tokens per
/// task; a prefill-only request performs no decode forwards beyond the one
/// implied first emission.
pub fn profile_tasks(
    model: &Model,
    tasks: &[Task],
    decode_len: usize,
    request: ProfileRequest,
) -> Result<ProfileBundle> {
    if tasks.is_empty() {
        return Err(Error::TaskValidation(
            "task list is empty; nothing to profile".to_string(),
        ));
    }
    let mut ids = std::collections::BTreeSet::new();
    for t in tasks {
        if !ids.insert(t.id.as_str()) {
            return Err(Error::TaskValidation(format!(
                "duplicate task id {:?}",
                t.id
            )));
        }
    }
    if request.wants_decode() && decode_len == 0 {
        return Err(Error::InvalidInput(
            "decode profiling requires decode_len >= 1".to_string(),
        ));
    }

    let max_new = if request.wants_decode() {
        decode_len + 1
    } else {
        1
    };
    let mut collector = ProfileCollector::new();
    for task in tasks {
        let prompt = crate::model::encode_prompt(&task.prompt);
        generate(model, &prompt, max_new, &mut collector)
            .map_err(|e| e.in_task(&task.id))?;
    }
    let task_ids: Vec<String> = tasks.iter().map(|t| t.id.clone()).collect();
    Ok(ProfileBundle {
        prefill: if request.wants_prefill() {
            Some(collector.into_profile(model, Phase::Prefill, &task_ids)?)
        } else {
            None
        },
        decode: if request.wants_decode() {
            Some(collector.into_profile(model, Phase::Decode, &task_ids)?)
        } else {
            None
        },
    })
}
