//! Snapshot format: one compact UTF-8 JSON document.
//!
//! ```text
//! {"format":"osreid-gallery","version":1,
//!  "config":{"d":..,"k":..,"th_emb":..,"ttl_ms":..},
//!  "next_global_id":N,
//!  "identities":[{"global_id":..,"created_at_ms":..,"last_matched_at_ms":..,
//!                 "slots":[{"inserted_at_ms":..,"embedding":[..]}]}]}
//! ```
//!
//! Numbers use shortest round-trip formatting, so restoring reproduces every
//! embedding bit for bit and the same state always yields the same bytes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Gallery, GalleryParams, IdentityRecord, Slot};
use crate::types::{Embedding, GlobalId};

pub const SNAPSHOT_FORMAT: &str = "osreid-gallery";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("malformed snapshot: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported snapshot format {format:?} version {version}")]
    Unsupported { format: String, version: u32 },
    #[error("identity {gid}: slot embedding has dimension {actual}, snapshot declares {expected}")]
    DimensionMismatch { gid: GlobalId, expected: usize, actual: usize },
    #[error("snapshot dimension {actual} does not match configured {expected}")]
    ConfigMismatch { expected: usize, actual: usize },
    #[error("inconsistent snapshot: {0}")]
    Inconsistent(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotDoc {
    format: String,
    version: u32,
    config: GalleryParams,
    next_global_id: u64,
    identities: Vec<IdentityDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IdentityDoc {
    global_id: GlobalId,
    created_at_ms: u64,
    last_matched_at_ms: u64,
    slots: Vec<SlotDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SlotDoc {
    inserted_at_ms: u64,
    embedding: Embedding,
}

/// Counts reported by `snapshot inspect`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotSummary {
    pub version: u32,
    pub config: GalleryParams,
    pub next_global_id: u64,
    pub identities: usize,
    pub slots: usize,
}

impl Gallery {
    pub fn snapshot(&self) -> Vec<u8> {
        let doc = SnapshotDoc {
            format: SNAPSHOT_FORMAT.to_owned(),
            version: SNAPSHOT_VERSION,
            config: self.params,
            next_global_id: self.next_id,
            identities: self
                .identities
                .iter()
                .map(|r| IdentityDoc {
                    global_id: r.global_id,
                    created_at_ms: r.created_at_ms,
                    last_matched_at_ms: r.last_matched_at_ms,
                    slots: r
                        .slots
                        .iter()
                        .map(|s| SlotDoc {
                            inserted_at_ms: s.inserted_at_ms,
                            embedding: s.embedding.clone(),
                        })
                        .collect(),
                })
                .collect(),
        };
        let mut bytes = serde_json::to_vec(&doc).expect("snapshot serializes");
        bytes.push(b'\n');
        bytes
    }

    /// Rebuilds a gallery from [`Gallery::snapshot`] output, checking every
    /// record invariant on the way in.
    pub fn restore(bytes: &[u8]) -> Result<Self, SnapshotError> {
        let doc: SnapshotDoc = serde_json::from_slice(bytes)?;
        if doc.format != SNAPSHOT_FORMAT || doc.version != SNAPSHOT_VERSION {
            return Err(SnapshotError::Unsupported {
                format: doc.format,
                version: doc.version,
            });
        }
        let params = doc.config;
        if params.d == 0 || params.k == 0 || !(params.th_emb >= 0.0) || params.ttl_ms == 0 {
            return Err(SnapshotError::Inconsistent(format!(
                "invalid config echo {params:?}"
            )));
        }
        let mut identities = Vec::with_capacity(doc.identities.len());
        let mut prev: Option<GlobalId> = None;
        for ident in doc.identities {
            let gid = ident.global_id;
            if prev.is_some_and(|p| p >= gid) {
                return Err(SnapshotError::Inconsistent(format!(
                    "identity ids not strictly increasing at {gid}"
                )));
            }
            if gid.0 >= doc.next_global_id {
                return Err(SnapshotError::Inconsistent(format!(
                    "identity {gid} not below counter {}",
                    doc.next_global_id
                )));
            }
            if ident.slots.is_empty() || ident.slots.len() > params.k {
                return Err(SnapshotError::Inconsistent(format!(
                    "identity {gid} has {} slots, expected 1..={}",
                    ident.slots.len(),
                    params.k
                )));
            }
            let mut slots = VecDeque::with_capacity(ident.slots.len());
            for s in ident.slots {
                if s.embedding.dim() != params.d {
                    return Err(SnapshotError::DimensionMismatch {
                        gid,
                        expected: params.d,
                        actual: s.embedding.dim(),
                    });
                }
                if slots.back().is_some_and(|b: &Slot| b.inserted_at_ms > s.inserted_at_ms) {
                    return Err(SnapshotError::Inconsistent(format!(
                        "identity {gid} slot timestamps decrease"
                    )));
                }
                slots.push_back(Slot {
                    embedding: s.embedding,
                    inserted_at_ms: s.inserted_at_ms,
                });
            }
            identities.push(IdentityRecord::from_parts(
                gid,
                slots,
                ident.created_at_ms,
                ident.last_matched_at_ms,
            ));
            prev = Some(gid);
        }
        Ok(Gallery {
            params,
            identities,
            next_id: doc.next_global_id,
        })
    }

    /// Restores and additionally checks the snapshot against the running dimension.
    pub fn restore_for(bytes: &[u8], expected_d: usize) -> Result<Self, SnapshotError> {
        let g = Self::restore(bytes)?;
        if g.params.d != expected_d {
            return Err(SnapshotError::ConfigMismatch {
                expected: expected_d,
                actual: g.params.d,
            });
        }
        Ok(g)
    }

    pub fn summary(&self) -> SnapshotSummary {
        SnapshotSummary {
            version: SNAPSHOT_VERSION,
            config: self.params,
            next_global_id: self.next_id,
            identities: self.identities.len(),
            slots: self.identities.iter().map(|r| r.len()).sum(),
        }
    }
}
