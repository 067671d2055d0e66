//! The open-set gallery.
//!
//! The gallery starts empty. Each enrolled identity keeps a circular buffer of
//! its `K` most recent embeddings and is represented by their centroid. A probe
//! is assigned to the identity with the nearest centroid when that distance is
//! at most `th_emb`; otherwise it enrolls as a new identity. Buffered embeddings
//! expire after `ttl_ms` of stream time, and identities whose buffer empties are
//! pruned. Global ids come from a monotonic counter and are never reused.
//!
//! All mutation goes through `&mut self`; callers serialize writers.

mod calibrate;
mod snapshot;

pub use calibrate::{calibrate_th_emb, CalibrationError};
pub use snapshot::{SnapshotError, SnapshotSummary, SNAPSHOT_FORMAT, SNAPSHOT_VERSION};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ValidatedConfig;
use crate::types::{l2_unchecked, Embedding, GlobalId, TypeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GalleryError {
    #[error("probe {0}")]
    Probe(#[from] TypeError),
}

/// The subset of the system configuration the gallery depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GalleryParams {
    pub d: usize,
    pub k: usize,
    pub th_emb: f64,
    pub ttl_ms: u64,
}

impl From<&ValidatedConfig> for GalleryParams {
    fn from(cfg: &ValidatedConfig) -> Self {
        Self {
            d: cfg.d,
            k: cfg.k,
            th_emb: cfg.th_emb,
            ttl_ms: cfg.ttl_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub embedding: Embedding,
    pub inserted_at_ms: u64,
}

/// One enrolled identity: up to `K` timestamped embeddings in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityRecord {
    global_id: GlobalId,
    slots: VecDeque<Slot>,
    created_at_ms: u64,
    last_matched_at_ms: u64,
    centroid: Vec<f64>,
}

impl IdentityRecord {
    fn new(global_id: GlobalId, first: Slot) -> Self {
        let created = first.inserted_at_ms;
        let mut record = Self {
            global_id,
            slots: VecDeque::from([first]),
            created_at_ms: created,
            last_matched_at_ms: created,
            centroid: Vec::new(),
        };
        record.refresh_centroid();
        record
    }

    fn from_parts(
        global_id: GlobalId,
        slots: VecDeque<Slot>,
        created_at_ms: u64,
        last_matched_at_ms: u64,
    ) -> Self {
        let mut record = Self {
            global_id,
            slots,
            created_at_ms,
            last_matched_at_ms,
            centroid: Vec::new(),
        };
        record.refresh_centroid();
        record
    }

    pub fn global_id(&self) -> GlobalId {
        self.global_id
    }

    pub fn slots(&self) -> impl ExactSizeIterator<Item = &Slot> {
        self.slots.iter()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn created_at_ms(&self) -> u64 {
        self.created_at_ms
    }

    pub fn last_matched_at_ms(&self) -> u64 {
        self.last_matched_at_ms
    }

    /// Mean of the occupied slots.
    pub fn centroid(&self) -> &[f64] {
        &self.centroid
    }

    // Summed in slot order, then divided by the occupied count (not K).
    fn refresh_centroid(&mut self) {
        let Some(first) = self.slots.front() else {
            self.centroid.clear();
            return;
        };
        let mut sum = vec![0.0; first.embedding.dim()];
        for slot in &self.slots {
            for (acc, v) in sum.iter_mut().zip(slot.embedding.as_slice()) {
                *acc += v;
            }
        }
        let n = self.slots.len() as f64;
        for acc in &mut sum {
            *acc /= n;
        }
        self.centroid = sum;
    }

    fn push(&mut self, slot: Slot, capacity: usize) {
        while self.slots.len() >= capacity {
            self.slots.pop_front();
        }
        self.last_matched_at_ms = slot.inserted_at_ms;
        self.slots.push_back(slot);
        self.refresh_centroid();
    }

    /// Drops slots older than the horizon. Returns how many were removed.
    fn expire(&mut self, now_ms: u64, ttl_ms: u64) -> usize {
        let mut removed = 0;
        while let Some(front) = self.slots.front() {
            if now_ms.saturating_sub(front.inserted_at_ms) > ttl_ms {
                self.slots.pop_front();
                removed += 1;
            } else {
                break;
            }
        }
        if removed > 0 {
            self.refresh_centroid();
        }
        removed
    }
}

/// Centroid of a record as an owned embedding.
pub fn centroid(record: &IdentityRecord) -> Embedding {
    Embedding::new(record.centroid.clone())
        .expect("centroid of finite embeddings is finite")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RetrievalResult {
    Matched { gid: GlobalId, distance: f64 },
    RejectedAsNew { min_distance: f64 },
    GalleryEmpty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Assignment {
    MatchedAndStored { gid: GlobalId, distance: f64 },
    NewIdentity { gid: GlobalId },
}

impl Assignment {
    pub fn gid(&self) -> GlobalId {
        match self {
            Assignment::MatchedAndStored { gid, .. } | Assignment::NewIdentity { gid } => *gid,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpiryReport {
    pub slots_removed: usize,
    pub identities_pruned: Vec<GlobalId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gallery {
    params: GalleryParams,
    // Ascending by global id: ids are minted in increasing order and appended.
    identities: Vec<IdentityRecord>,
    next_id: u64,
}

impl Gallery {
    pub fn new(cfg: &ValidatedConfig) -> Self {
        Self {
            params: GalleryParams::from(cfg),
            identities: Vec::new(),
            next_id: 0,
        }
    }

    pub fn params(&self) -> &GalleryParams {
        &self.params
    }

    pub fn identities(&self) -> &[IdentityRecord] {
        &self.identities
    }

    pub fn identity(&self, gid: GlobalId) -> Option<&IdentityRecord> {
        self.identities
            .binary_search_by_key(&gid, |r| r.global_id)
            .ok()
            .map(|i| &self.identities[i])
    }

    pub fn len(&self) -> usize {
        self.identities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identities.is_empty()
    }

    /// The id the next enrolled identity will receive.
    pub fn next_global_id(&self) -> GlobalId {
        GlobalId(self.next_id)
    }

    /// Nearest centroid by Euclidean distance, lowest id on exact ties.
    pub fn nearest(&self, probe: &Embedding) -> Result<Option<(GlobalId, f64)>, GalleryError> {
        probe.check_dim(self.params.d)?;
        let mut best: Option<(GlobalId, f64)> = None;
        for record in &self.identities {
            let dist = l2_unchecked(probe.as_slice(), &record.centroid);
            if best.is_none_or(|(_, b)| dist < b) {
                best = Some((record.global_id, dist));
            }
        }
        Ok(best)
    }

    /// Pure lookup: nearest identity, accepted when its distance is ≤ `th_emb`.
    pub fn query(&self, probe: &Embedding) -> Result<RetrievalResult, GalleryError> {
        Ok(match self.nearest(probe)? {
            None => RetrievalResult::GalleryEmpty,
            Some((gid, distance)) if distance <= self.params.th_emb => {
                RetrievalResult::Matched { gid, distance }
            }
            Some((_, min_distance)) => RetrievalResult::RejectedAsNew { min_distance },
        })
    }

    /// Query, then either store the probe in the matched identity's buffer or
    /// enroll it as a new identity.
    pub fn observe(&mut self, probe: &Embedding, now_ms: u64) -> Result<Assignment, GalleryError> {
        let slot = Slot {
            embedding: probe.clone(),
            inserted_at_ms: now_ms,
        };
        match self.query(probe)? {
            RetrievalResult::Matched { gid, distance } => {
                let idx = self
                    .identities
                    .binary_search_by_key(&gid, |r| r.global_id)
                    .expect("matched identity exists");
                self.identities[idx].push(slot, self.params.k);
                Ok(Assignment::MatchedAndStored { gid, distance })
            }
            RetrievalResult::RejectedAsNew { .. } | RetrievalResult::GalleryEmpty => {
                let gid = GlobalId(self.next_id);
                self.next_id += 1;
                self.identities.push(IdentityRecord::new(gid, slot));
                Ok(Assignment::NewIdentity { gid })
            }
        }
    }

    /// Earliest stream time at which some slot will have expired.
    pub fn next_expiry_ms(&self) -> Option<u64> {
        self.identities
            .iter()
            .filter_map(|r| r.slots.front())
            .map(|s| s.inserted_at_ms.saturating_add(self.params.ttl_ms).saturating_add(1))
            .min()
    }

    /// Removes every slot older than `ttl_ms` and every identity left empty.
    pub fn expire(&mut self, now_ms: u64) -> ExpiryReport {
        let ttl = self.params.ttl_ms;
        let mut report = ExpiryReport::default();
        for record in &mut self.identities {
            report.slots_removed += record.expire(now_ms, ttl);
            if record.is_empty() {
                report.identities_pruned.push(record.global_id);
            }
        }
        if !report.identities_pruned.is_empty() {
            self.identities.retain(|r| !r.is_empty());
        }
        report
    }
}
