//! Engine configuration and its validation.

use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rule for choosing between identities at exactly equal centroid distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestGlobalId,
}

/// How a bound track reacts when re-identification returns a different identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictPolicy {
    /// The newest re-identification result always wins.
    #[default]
    LatestWins,
    /// The first binding is kept until the track dies.
    Sticky,
    /// Rebind only when the new id holds a strict majority of the last `n` results.
    VoteLastN(usize),
}

impl ConflictPolicy {
    pub const DEFAULT_VOTE_WINDOW: usize = 3;

    pub(crate) fn window(&self) -> usize {
        match self {
            ConflictPolicy::VoteLastN(n) => *n,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Embedding dimension.
    pub d: usize,
    /// Circular buffer capacity per identity.
    pub k: usize,
    /// Maximum centroid distance accepted as a match.
    pub th_emb: f64,
    /// Detections must score strictly above this to trigger re-identification.
    pub th_score: f64,
    /// Buffered embeddings older than this (stream time) expire.
    pub ttl_ms: u64,
    /// Tracks unseen for longer than this are dropped.
    pub track_lost_ms: u64,
    pub tie_break: TieBreak,
    pub conflict_policy: ConflictPolicy,
    pub seed: u64,
    /// Stream-time period of the background expiry and track-pruning sweep.
    pub expiry_interval_ms: u64,
    /// Register unknown cameras on their first event instead of rejecting it.
    pub auto_register: bool,
    /// How far a timestamp may run behind the stream clock before the run aborts.
    pub order_tolerance_ms: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            d: 2048,
            k: 8,
            th_emb: 19.95,
            th_score: 0.91,
            ttl_ms: 600_000,
            track_lost_ms: 3_000,
            tie_break: TieBreak::LowestGlobalId,
            conflict_policy: ConflictPolicy::LatestWins,
            seed: 0,
            expiry_interval_ms: 1_000,
            auto_register: true,
            order_tolerance_ms: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

impl ConfigError {
    pub(crate) fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

impl SystemConfig {
    /// Checks every invariant and reports the first failing field.
    pub fn validate(self) -> Result<ValidatedConfig, ConfigError> {
        if self.d < 1 {
            return Err(ConfigError::new("d", "d must be ≥ 1"));
        }
        if self.k < 1 {
            return Err(ConfigError::new("k", "K must be ≥ 1"));
        }
        if !(self.th_emb.is_finite() && self.th_emb >= 0.0) {
            return Err(ConfigError::new(
                "th_emb",
                format!("th_emb must be finite and ≥ 0, got {}", self.th_emb),
            ));
        }
        if !(0.0..=1.0).contains(&self.th_score) {
            return Err(ConfigError::new(
                "th_score",
                format!("th_score must be in [0, 1], got {}", self.th_score),
            ));
        }
        if self.ttl_ms == 0 {
            return Err(ConfigError::new("ttl_ms", "ttl_ms must be positive"));
        }
        if self.track_lost_ms == 0 {
            return Err(ConfigError::new(
                "track_lost_ms",
                "track_lost_ms must be positive",
            ));
        }
        if let ConflictPolicy::VoteLastN(0) = self.conflict_policy {
            return Err(ConfigError::new(
                "conflict_policy",
                "vote_last_n window must be ≥ 1",
            ));
        }
        if self.expiry_interval_ms == 0 {
            return Err(ConfigError::new(
                "expiry_interval_ms",
                "expiry_interval_ms must be positive",
            ));
        }
        Ok(ValidatedConfig(self))
    }
}

/// A [`SystemConfig`] whose invariants have been checked.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedConfig(SystemConfig);

impl ValidatedConfig {
    pub fn into_inner(self) -> SystemConfig {
        self.0
    }
}

impl Deref for ValidatedConfig {
    type Target = SystemConfig;

    fn deref(&self) -> &SystemConfig {
        &self.0
    }
}
