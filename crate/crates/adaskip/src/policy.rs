//! Skip plan construction, offline and online.
//!
//! The offline planner ranks all 2M sublayers by mean IO similarity and
//! skips the top 2m, where m comes from the acceleration ratio alpha:
//! m = round(M - M/alpha). Each skipped sublayer carries the profile's mean
//! norm ratio as its compensation scale. Because the ranking is fixed for a
//! given profile, raising alpha only ever grows the skip set.
//!
//! The online extension watches FFN IO during the first P decoded tokens
//! and then skips, from the next token on, every FFN outside the offline
//! set whose window mean similarity strictly exceeds beta, the smallest
//! mean similarity among the offline-skipped sublayers. Extension scales
//! come from the window itself, the only context-specific source.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Phase, SublayerIo, SublayerKind, SublayerRef};
use crate::profiler::{ProfileEntry, SimilarityProfile, SublayerStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Adaskip,
    EarlySkip,
    Periodic,
    EarlyExit,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Adaskip => "adaskip",
            Strategy::EarlySkip => "early_skip",
            Strategy::Periodic => "periodic",
            Strategy::EarlyExit => "early_exit",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    /// Accepts both the serialized names and the short command-line forms
    /// `early`, `exit`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaskip" => Ok(Strategy::Adaskip),
            "early" | "early_skip" => Ok(Strategy::EarlySkip),
            "periodic" => Ok(Strategy::Periodic),
            "exit" | "early_exit" => Ok(Strategy::EarlyExit),
            _ => Err(Error::InvalidInput(format!("unknown strategy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedSkip {
    pub layer: usize,
    pub kind: SublayerKind,
    pub scale: f64,
}

impl PlannedSkip {
    pub fn sublayer(&self) -> SublayerRef {
        SublayerRef {
            layer: self.layer,
            kind: self.kind,
        }
    }
}

/// A static skip decision, applied in both phases. `skipped` always holds
/// exactly 2m entries sorted by (layer, kind).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkipPlan {
    pub strategy: Strategy,
    pub alpha: f64,
    pub m: usize,
    pub skipped: Vec<PlannedSkip>,
    pub protect_first: bool,
    pub protect_last: bool,
    /// Online extension threshold: the smallest mean similarity among the
    /// offline-skipped sublayers. Absent when nothing is skipped.
    pub beta: Option<f64>,
    /// Digest of the profile this plan was ranked from; absent for
    /// profile-free baselines.
    pub source_profile_digest: Option<String>,
}

impl SkipPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 1.0) {
            return Err(Error::InvalidRatio(self.alpha));
        }
        if self.skipped.len() != 2 * self.m {
            return Err(Error::InfeasiblePlan(format!(
                "m={} but {} skipped sublayers",
                self.m,
                self.skipped.len()
            )));
        }
        let mut prev: Option<SublayerRef> = None;
        for s in &self.skipped {
            if !(s.scale.is_finite() && s.scale > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{}: skip scale {} must be finite and positive",
                    s.sublayer(),
                    s.scale
                )));
            }
            if let Some(p) = prev {
                if p >= s.sublayer() {
                    return Err(Error::InfeasiblePlan(format!(
                        "skipped list not sorted/unique at {}",
                        s.sublayer()
                    )));
                }
            }
            prev = Some(s.sublayer());
        }
        if let Some(beta) = self.beta {
            if !(-1.0..=1.0).contains(&beta) {
                return Err(Error::InvalidInput(format!("beta {beta} outside [-1, 1]")));
            }
        }
        Ok(())
    }

    /// Additionally check the plan fits a model with `n_layers` blocks.
    pub fn validate_for_model(&self, n_layers: usize) -> Result<()> {
        self.validate()?;
        for s in &self.skipped {
            if s.layer >= n_layers {
                return Err(Error::InfeasiblePlan(format!(
                    "{} out of range for a {n_layers}-layer model",
                    s.sublayer()
                )));
            }
        }
        Ok(())
    }

    pub fn skip_set(&self) -> BTreeSet<SublayerRef> {
        self.skipped.iter().map(PlannedSkip::sublayer).collect()
    }

    pub fn scale_map(&self) -> BTreeMap<SublayerRef, f64> {
        self.skipped
            .iter()
            .map(|s| (s.sublayer(), s.scale))
            .collect()
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("plan serialization");
        bytes.push(b'\n');
        bytes
    }

    /// SHA-256 of the canonical form, hex encoded; reports embed it.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_bytes());
        hex::encode(hasher.finalize())
    }
}

pub fn save_plan(path: &Path, plan: &SkipPlan) -> Result<()> {
    plan.validate()?;
    crate::write_atomic(path, &plan.canonical_bytes())
}

pub fn load_plan(path: &Path) -> Result<SkipPlan> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let plan: SkipPlan = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    plan.validate()?;
    Ok(plan)
}

/// Layer pairs to skip for an acceleration ratio: m = round(M - M/alpha)
/// (half away from zero), kept below M so at least one pair always runs.
pub fn skip_count(n_layers: usize, alpha: f64) -> Result<usize> {
    if !(alpha.is_finite() && alpha >= 1.0) {
        return Err(Error::InvalidRatio(alpha));
    }
    let m_f = n_layers as f64;
    let m = (m_f - m_f / alpha).round() as usize;
    Ok(m.min(n_layers.saturating_sub(1)))
}

/// Ideal speedup from skipping m of M layer pairs: M / (M - m).
pub fn theoretical_speedup(n_layers: usize, m: usize) -> f64 {
    assert!(m < n_layers, "speedup undefined at m >= n_layers");
    n_layers as f64 / (n_layers - m) as f64
}

/// Profile entries sorted by mean similarity descending; ties resolve to
/// the lower (layer, kind) so rankings are reproducible.
pub fn ranked_sublayers(profile: &SimilarityProfile) -> Vec<&ProfileEntry> {
    let mut entries: Vec<&ProfileEntry> = profile.sublayers.iter().collect();
    entries.sort_by(|a, b| {
        b.mean_similarity
            .partial_cmp(&a.mean_similarity)
            .expect("similarities are finite")
            .then_with(|| a.sublayer().cmp(&b.sublayer()))
    });
    entries
}

/// How large a plan to build: either an acceleration ratio or an explicit
/// skipped-sublayer budget (which must be even, two per layer pair).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanSize {
    Alpha(f64),
    TargetSublayers(usize),
}

impl PlanSize {
    /// Resolve to (m, alpha) for a model with `n_layers` pairs.
    fn resolve(self, n_layers: usize) -> Result<(usize, f64)> {
        match self {
            PlanSize::Alpha(alpha) => Ok((skip_count(n_layers, alpha)?, alpha)),
            PlanSize::TargetSublayers(target) => {
                if target % 2 != 0 {
                    return Err(Error::InvalidInput(format!(
                        "target sublayer count {target} must be even \
                         (attention and FFN are budgeted in pairs)"
                    )));
                }
                let m = target / 2;
                if m >= n_layers {
                    return Err(Error::InfeasiblePlan(format!(
                        "cannot skip {target} of {} sublayers",
                        2 * n_layers
                    )));
                }
                Ok((m, theoretical_speedup(n_layers, m)))
            }
        }
    }
}

/// Optional boundary protection for ranked plans. The ranking itself never
/// protects anything; these exist for experiments and default to off.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlanOptions {
    pub protect_first: bool,
    pub protect_last: bool,
}

/// Threshold for the online extension: the smallest profiled mean
/// similarity among the plan's skipped sublayers.
pub fn derive_beta(plan: &SkipPlan, profile: &SimilarityProfile) -> Result<f64> {
    if plan.skipped.is_empty() {
        return Err(Error::UndefinedThreshold);
    }
    let mut beta = f64::INFINITY;
    for s in &plan.skipped {
        let entry = profile.entry(s.sublayer()).ok_or_else(|| {
            Error::IncompleteProfile(format!("no entry for skipped {}", s.sublayer()))
        })?;
        beta = beta.min(entry.mean_similarity);
    }
    Ok(beta)
}

/// Rank by profiled similarity and skip the top 2m sublayers with their
/// profiled compensation scales.
pub fn build_offline_plan(
    profile: &SimilarityProfile,
    size: PlanSize,
    options: PlanOptions,
) -> Result<SkipPlan> {
    profile.validate()?;
    let n_layers = profile.n_layers();
    let (m, alpha) = size.resolve(n_layers)?;
    let ranked: Vec<&ProfileEntry> = ranked_sublayers(profile)
        .into_iter()
        .filter(|e| {
            !(options.protect_first && e.layer == 0
                || options.protect_last && e.layer == n_layers - 1)
        })
        .collect();
    if 2 * m > ranked.len() {
        return Err(Error::InfeasiblePlan(format!(
            "need {} sublayers but only {} are unprotected",
            2 * m,
            ranked.len()
        )));
    }
    let chosen = &ranked[..2 * m];
    let mut skipped: Vec<PlannedSkip> = chosen
        .iter()
        .map(|e| PlannedSkip {
            layer: e.layer,
            kind: e.kind,
            scale: e.mean_scale,
        })
        .collect();
    skipped.sort_by_key(|s| s.sublayer());
    let mut plan = SkipPlan {
        strategy: Strategy::Adaskip,
        alpha,
        m,
        skipped,
        protect_first: options.protect_first,
        protect_last: options.protect_last,
        beta: None,
        source_profile_digest: Some(profile.digest()),
    };
    if !plan.skipped.is_empty() {
        plan.beta = Some(derive_beta(&plan, profile)?);
    }
    plan.validate()?;
    Ok(plan)
}

/// Position-based baselines. Each skips whole layer pairs (attention and
/// FFN together) with no compensation, differing only in where:
/// early_skip takes the leading layers after the first, periodic spreads
/// evenly over the interior, early_exit truncates the tail.
pub fn baseline_plan(strategy: Strategy, n_layers: usize, size: PlanSize) -> Result<SkipPlan> {
    assert!(
        strategy != Strategy::Adaskip,
        "adaskip plans come from build_offline_plan"
    );
    if n_layers == 0 {
        return Err(Error::InvalidConfig("model has no layers".to_string()));
    }
    let (m, alpha) = size.resolve(n_layers)?;
    let layers: Vec<usize> = match strategy {
        Strategy::EarlySkip => {
            if m > n_layers - 1 {
                return Err(Error::InfeasiblePlan(format!(
                    "early_skip keeps layer 0; cannot skip {m} of {n_layers}"
                )));
            }
            (1..=m).collect()
        }
        Strategy::Periodic => {
            if n_layers < 2 || m > n_layers - 2 {
                return Err(Error::InfeasiblePlan(format!(
                    "periodic keeps the first and last layers; \
                     cannot skip {m} of {n_layers}"
                )));
            }
            (0..m).map(|i| 1 + i * (n_layers - 2) / m).collect()
        }
        Strategy::EarlyExit => {
            if m > n_layers - 1 {
                return Err(Error::InfeasiblePlan(format!(
                    "early_exit keeps layer 0; cannot skip {m} of {n_layers}"
                )));
            }
            (n_layers - m..n_layers).collect()
        }
        Strategy::Adaskip => unreachable!(),
    };
    let mut skipped = Vec::with_capacity(2 * m);
    for &layer in &layers {
        for kind in [SublayerKind::Attention, SublayerKind::Ffn] {
            skipped.push(PlannedSkip {
                layer,
                kind,
                scale: 1.0,
            });
        }
    }
    let plan = SkipPlan {
        strategy,
        alpha,
        m,
        skipped,
        protect_first: true,
        protect_last: matches!(strategy, Strategy::Periodic),
        beta: None,
        source_profile_digest: None,
    };
    plan.validate()?;
    Ok(plan)
}

/// The online window's verdict: `extra` holds the newly skipped FFNs with
/// window-derived scales, `skipped_p` the full adaptive set including the
/// offline members with their original scales.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineOutcome {
    pub extra: Vec<PlannedSkip>,
    pub skipped_p: Vec<PlannedSkip>,
}

/// Accumulates FFN IO similarity over the first P decoded tokens, then
/// extends the skip set once.
#[derive(Debug)]
pub struct OnlineState {
    window: usize,
    beta: f64,
    stats: BTreeMap<SublayerRef, SublayerStats>,
    outcome: Option<OnlineOutcome>,
}

impl OnlineState {
    /// `candidates` are the FFN sublayers that will execute during the
    /// window; attention never participates in the online extension.
    pub fn new(window: usize, beta: f64, candidates: BTreeSet<SublayerRef>) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidInput(
                "online window must be at least 1 token".to_string(),
            ));
        }
        if !(-1.0..=1.0).contains(&beta) {
            return Err(Error::InvalidInput(format!("beta {beta} outside [-1, 1]")));
        }
        for c in &candidates {
            if c.kind != SublayerKind::Ffn {
                return Err(Error::InvalidInput(format!(
                    "online candidate {c} is not an FFN sublayer"
                )));
            }
        }
        Ok(OnlineState {
            window,
            beta,
            stats: candidates
                .into_iter()
                .map(|c| (c, SublayerStats::default()))
                .collect(),
            outcome: None,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn is_finalized(&self) -> bool {
        self.outcome.is_some()
    }

    /// True once every candidate holds a full window of observations.
    pub fn window_complete(&self) -> bool {
        self.stats.values().all(|s| s.tokens() == self.window as u64)
    }

    /// Record one executed-FFN decode observation. Attention and prefill
    /// IO are ignored so the runtime hook can forward everything it sees.
    pub fn observe(&mut self, io: &SublayerIo) -> Result<()> {
        if io.sublayer.kind != SublayerKind::Ffn || io.phase != Phase::Decode {
            return Ok(());
        }
        if self.is_finalized() {
            return Err(Error::ObserveAfterFinalize);
        }
        let window = self.window as u64;
        let stats = self.stats.get_mut(&io.sublayer).ok_or_else(|| {
            Error::InvalidInput(format!(
                "{} observed online but is not a candidate",
                io.sublayer
            ))
        })?;
        if stats.tokens() >= window {
            return Err(Error::WindowExceeded {
                sublayer: io.sublayer,
                window: self.window,
            });
        }
        stats.record(&io.input, &io.output)
    }

    /// Close the window against the offline plan: the adaptive set is the
    /// plan's skips plus every candidate FFN outside it whose window mean
    /// strictly exceeds beta. Every candidate must hold exactly `window`
    /// observations; runs once.
    pub fn finalize(&mut self, plan: &SkipPlan) -> Result<OnlineOutcome> {
        if self.is_finalized() {
            return Err(Error::InvalidInput(
                "online window already finalized".to_string(),
            ));
        }
        for (sublayer, stats) in &self.stats {
            if stats.tokens() < self.window as u64 {
                return Err(Error::PrematureFinalize(format!(
                    "{} has {} of {} observations",
                    sublayer,
                    stats.tokens(),
                    self.window
                )));
            }
        }
        let offline = plan.skip_set();
        let mut extra = Vec::new();
        for (sublayer, stats) in &self.stats {
            if offline.contains(sublayer) {
                continue;
            }
            let (mean_sim, mean_scale, _) = stats.finalize()?;
            if mean_sim > self.beta {
                extra.push(PlannedSkip {
                    layer: sublayer.layer,
                    kind: sublayer.kind,
                    scale: mean_scale,
                });
            }
        }
        let mut skipped_p = plan.skipped.clone();
        skipped_p.extend(extra.iter().cloned());
        skipped_p.sort_by_key(|s| s.sublayer());
        let outcome = OnlineOutcome { extra, skipped_p };
        self.outcome = Some(outcome.clone());
        Ok(outcome)
    }

    /// The decision, once `finalize` has produced it.
    pub fn outcome(&self) -> Option<&OnlineOutcome> {
        self.outcome.as_ref()
    }
}
