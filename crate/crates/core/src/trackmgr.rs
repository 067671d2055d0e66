//! Per-camera track lifecycle and the score gate.
//!
//! The upstream tracker supplies a pseudo-id per detection. The manager keeps
//! one [`TrackState`] per pseudo-id, decides whether a detection is good enough
//! to be re-identified (`score > th_score` strictly), and otherwise lets the
//! track carry whatever global identity it is already bound to.
//!
//! A track unseen for more than `track_lost_ms` is dead: a later detection with
//! the same pseudo-id starts a fresh, unbound track. This holds whether or not
//! [`TrackManager::prune_lost_tracks`] has run in between, so pruning only
//! reclaims memory and never changes decisions.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConflictPolicy, SystemConfig};
use crate::types::{DetectionEvent, Embedding, EventError, GlobalId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackError {
    #[error("event for camera {got:?} routed to manager of {expected:?}")]
    WrongCamera { expected: String, got: String },
    #[error("malformed event: {0}")]
    Malformed(#[from] EventError),
    #[error("frame index went backwards on {camera}: {previous} -> {current}")]
    FrameRegression { camera: String, previous: u64, current: u64 },
    #[error("score {score} passed the gate but the event carries no embedding")]
    MissingEmbedding { score: f64 },
    #[error("unknown track {0}")]
    UnknownTrack(TrackKey),
    #[error("track {0} is not active")]
    Inactive(TrackKey),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrackKey {
    pub camera_id: String,
    pub track_id: u64,
}

impl std::fmt::Display for TrackKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.camera_id, self.track_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Active,
    Lost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub camera_id: String,
    pub track_id: u64,
    pub bound_global_id: Option<GlobalId>,
    pub recent_global_votes: VecDeque<GlobalId>,
    pub last_seen_ms: u64,
    pub status: TrackStatus,
}

impl TrackState {
    fn fresh(camera_id: &str, track_id: u64, now_ms: u64) -> Self {
        Self {
            camera_id: camera_id.to_owned(),
            track_id,
            bound_global_id: None,
            recent_global_votes: VecDeque::new(),
            last_seen_ms: now_ms,
            status: TrackStatus::Active,
        }
    }

    fn is_stale(&self, now_ms: u64, lost_ms: u64) -> bool {
        now_ms.saturating_sub(self.last_seen_ms) > lost_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrackDecision {
    /// Score too low and the track has no identity yet.
    Filtered,
    /// Score passed the gate; the embedding goes to the gallery.
    ReIdRequested(Embedding),
    /// Score too low but the track already carries an identity.
    Maintained(GlobalId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BindingOutcome {
    FirstBind { gid: GlobalId },
    Confirmed { gid: GlobalId },
    Switched { from: GlobalId, to: GlobalId },
    HeldByPolicy { bound: GlobalId, proposed: GlobalId },
}

impl BindingOutcome {
    /// Identity the track carries after the result was applied.
    pub fn bound(&self) -> GlobalId {
        match *self {
            BindingOutcome::FirstBind { gid } | BindingOutcome::Confirmed { gid } => gid,
            BindingOutcome::Switched { to, .. } => to,
            BindingOutcome::HeldByPolicy { bound, .. } => bound,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrackManager {
    camera_id: String,
    tracks: BTreeMap<u64, TrackState>,
    last_frame_index: Option<u64>,
}

impl TrackManager {
    pub fn new(camera_id: impl Into<String>) -> Self {
        Self {
            camera_id: camera_id.into(),
            tracks: BTreeMap::new(),
            last_frame_index: None,
        }
    }

    pub fn camera_id(&self) -> &str {
        &self.camera_id
    }

    pub fn track(&self, track_id: u64) -> Option<&TrackState> {
        self.tracks.get(&track_id)
    }

    pub fn tracks(&self) -> impl Iterator<Item = &TrackState> {
        self.tracks.values()
    }

    fn key(&self, track_id: u64) -> TrackKey {
        TrackKey {
            camera_id: self.camera_id.clone(),
            track_id,
        }
    }

    /// Refreshes the event's track and runs the score gate.
    ///
    /// The event is fully validated before any state changes.
    pub fn ingest(
        &mut self,
        event: &DetectionEvent,
        cfg: &SystemConfig,
    ) -> Result<TrackDecision, TrackError> {
        if event.camera_id != self.camera_id {
            return Err(TrackError::WrongCamera {
                expected: self.camera_id.clone(),
                got: event.camera_id.clone(),
            });
        }
        event.validate(cfg.d)?;
        if let Some(prev) = self.last_frame_index {
            if event.frame_index < prev {
                return Err(TrackError::FrameRegression {
                    camera: self.camera_id.clone(),
                    previous: prev,
                    current: event.frame_index,
                });
            }
        }
        let gate_passed = event.score > cfg.th_score;
        if gate_passed && event.embedding.is_none() {
            return Err(TrackError::MissingEmbedding { score: event.score });
        }

        self.last_frame_index = Some(event.frame_index);
        let now = event.timestamp_ms;
        let track = self
            .tracks
            .entry(event.track_id)
            .or_insert_with(|| TrackState::fresh(&event.camera_id, event.track_id, now));
        if track.is_stale(now, cfg.track_lost_ms) {
            *track = TrackState::fresh(&event.camera_id, event.track_id, now);
        }
        track.last_seen_ms = track.last_seen_ms.max(now);

        Ok(match (&event.embedding, track.bound_global_id) {
            (Some(e), _) if gate_passed => TrackDecision::ReIdRequested(e.clone()),
            (_, Some(gid)) => TrackDecision::Maintained(gid),
            _ => TrackDecision::Filtered,
        })
    }

    /// Binds or rebinds a track to the identity returned by the gallery.
    pub fn apply_reid_result(
        &mut self,
        track_id: u64,
        gid: GlobalId,
        cfg: &SystemConfig,
    ) -> Result<BindingOutcome, TrackError> {
        let key = self.key(track_id);
        let track = self
            .tracks
            .get_mut(&track_id)
            .ok_or_else(|| TrackError::UnknownTrack(key.clone()))?;
        if track.status != TrackStatus::Active {
            return Err(TrackError::Inactive(key));
        }

        let window = cfg.conflict_policy.window();
        track.recent_global_votes.push_back(gid);
        while track.recent_global_votes.len() > window {
            track.recent_global_votes.pop_front();
        }

        let outcome = match track.bound_global_id {
            None => BindingOutcome::FirstBind { gid },
            Some(bound) if bound == gid => BindingOutcome::Confirmed { gid },
            Some(bound) => {
                let rebind = match cfg.conflict_policy {
                    ConflictPolicy::LatestWins => true,
                    ConflictPolicy::Sticky => false,
                    ConflictPolicy::VoteLastN(n) => {
                        let votes = track.recent_global_votes.iter().filter(|v| **v == gid).count();
                        2 * votes > n
                    }
                };
                if rebind {
                    BindingOutcome::Switched { from: bound, to: gid }
                } else {
                    BindingOutcome::HeldByPolicy { bound, proposed: gid }
                }
            }
        };
        track.bound_global_id = Some(outcome.bound());
        Ok(outcome)
    }

    /// Drops every track unseen for more than `track_lost_ms`.
    pub fn prune_lost_tracks(&mut self, now_ms: u64, cfg: &SystemConfig) -> Vec<TrackKey> {
        let mut pruned = Vec::new();
        self.tracks.retain(|&id, t| {
            if t.is_stale(now_ms, cfg.track_lost_ms) {
                t.status = TrackStatus::Lost;
                pruned.push(id);
                false
            } else {
                true
            }
        });
        pruned.into_iter().map(|id| self.key(id)).collect()
    }

    /// Other live tracks in this camera currently bound to `gid`.
    pub fn other_live_tracks_bound_to(
        &self,
        gid: GlobalId,
        except_track: u64,
        now_ms: u64,
        cfg: &SystemConfig,
    ) -> Vec<u64> {
        self.tracks
            .values()
            .filter(|t| {
                t.track_id != except_track
                    && t.bound_global_id == Some(gid)
                    && !t.is_stale(now_ms, cfg.track_lost_ms)
            })
            .map(|t| t.track_id)
            .collect()
    }
}
