//! Global coordinator: one gallery, one track manager per camera.
//!
//! Every event passes through [`Orchestrator::process`], which is the single
//! serialization point for gallery access. Time is event time: the stream
//! clock is the largest timestamp seen so far, and both embedding expiry and
//! track pruning are evaluated against it.
//!
//! Expiry is exact for lookups. Before each gallery observe, any slot older
//! than `ttl_ms` is dropped, so a probe never matches an expired embedding.
//! Independently, a sweep every `expiry_interval_ms` of stream time expires the
//! gallery and prunes dead tracks to bound memory. Ids pruned during an event
//! are listed in that event's outcome so downstream consumers can follow the
//! gallery's lifetime without access to it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ValidatedConfig;
use crate::gallery::{Assignment, Gallery, GalleryError};
use crate::trackmgr::{BindingOutcome, TrackDecision, TrackError, TrackManager};
use crate::types::{DetectionEvent, GlobalId};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("camera {0:?} is already registered")]
    DuplicateCamera(String),
    #[error("camera {0:?} is not registered")]
    UnknownCamera(String),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Gallery(#[from] GalleryError),
    #[error("event {index}: timestamp {timestamp_ms} is behind stream clock {clock_ms} beyond tolerance {tolerance_ms} ms")]
    OutOfOrder {
        index: usize,
        timestamp_ms: u64,
        clock_ms: u64,
        tolerance_ms: u64,
    },
    #[error("event {index}: {source}")]
    AtEvent {
        index: usize,
        #[source]
        source: Box<OrchestratorError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decision {
    Filtered,
    Maintained { gid: GlobalId },
    Matched { gid: GlobalId, distance: f64 },
    NewIdentity { gid: GlobalId },
}

impl Decision {
    pub fn gid(&self) -> Option<GlobalId> {
        match *self {
            Decision::Filtered => None,
            Decision::Maintained { gid }
            | Decision::Matched { gid, .. }
            | Decision::NewIdentity { gid } => Some(gid),
        }
    }

    /// True for decisions that queried the gallery.
    pub fn is_probe(&self) -> bool {
        matches!(self, Decision::Matched { .. } | Decision::NewIdentity { .. })
    }
}

/// Audit record emitted for every input event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentOutcome {
    pub camera_id: String,
    pub frame_index: u64,
    pub track_id: u64,
    pub timestamp_ms: u64,
    /// Echo of the event's ground-truth label, when it had one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_identity: Option<String>,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<BindingOutcome>,
    /// Gallery identities pruned by expiry while processing this event.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expired: Vec<GlobalId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Orchestrator {
    cfg: ValidatedConfig,
    gallery: Gallery,
    cameras: BTreeMap<String, TrackManager>,
    clock_ms: Option<u64>,
    last_sweep_ms: Option<u64>,
    events_seen: usize,
}

impl Orchestrator {
    pub fn new(cfg: ValidatedConfig) -> Self {
        let gallery = Gallery::new(&cfg);
        Self::with_gallery(cfg, gallery)
    }

    /// Resumes from an existing gallery, e.g. one restored from a snapshot.
    pub fn with_gallery(cfg: ValidatedConfig, gallery: Gallery) -> Self {
        Self {
            cfg,
            gallery,
            cameras: BTreeMap::new(),
            clock_ms: None,
            last_sweep_ms: None,
            events_seen: 0,
        }
    }

    pub fn config(&self) -> &ValidatedConfig {
        &self.cfg
    }

    pub fn gallery(&self) -> &Gallery {
        &self.gallery
    }

    pub fn camera(&self, camera_id: &str) -> Option<&TrackManager> {
        self.cameras.get(camera_id)
    }

    pub fn cameras(&self) -> impl Iterator<Item = &str> {
        self.cameras.keys().map(String::as_str)
    }

    pub fn register_camera(&mut self, camera_id: &str) -> Result<(), OrchestratorError> {
        if self.cameras.contains_key(camera_id) {
            return Err(OrchestratorError::DuplicateCamera(camera_id.to_owned()));
        }
        self.cameras
            .insert(camera_id.to_owned(), TrackManager::new(camera_id));
        Ok(())
    }

    /// Processes one event and returns its audit record.
    pub fn process(&mut self, event: &DetectionEvent) -> Result<AssignmentOutcome, OrchestratorError> {
        if !self.cameras.contains_key(&event.camera_id) {
            if self.cfg.auto_register {
                self.register_camera(&event.camera_id)?;
            } else {
                return Err(OrchestratorError::UnknownCamera(event.camera_id.clone()));
            }
        }

        let now = self.clock_ms.map_or(event.timestamp_ms, |c| c.max(event.timestamp_ms));
        self.clock_ms = Some(now);
        let mut expired = Vec::new();
        self.maybe_sweep(now, &mut expired);

        let cfg = &self.cfg;
        let manager = self
            .cameras
            .get_mut(&event.camera_id)
            .expect("camera registered above");
        let (decision, binding) = match manager.ingest(event, cfg)? {
            TrackDecision::Filtered => (Decision::Filtered, None),
            TrackDecision::Maintained(gid) => (Decision::Maintained { gid }, None),
            TrackDecision::ReIdRequested(embedding) => {
                if self.gallery.next_expiry_ms().is_some_and(|t| t <= now) {
                    expired.extend(self.gallery.expire(now).identities_pruned);
                }
                let assignment = self.gallery.observe(&embedding, now)?;
                let binding = manager.apply_reid_result(event.track_id, assignment.gid(), cfg)?;
                let decision = match assignment {
                    Assignment::MatchedAndStored { gid, distance } => Decision::Matched { gid, distance },
                    Assignment::NewIdentity { gid } => Decision::NewIdentity { gid },
                };
                (decision, Some(binding))
            }
        };

        let mut warnings = Vec::new();
        let bound = manager.track(event.track_id).and_then(|t| t.bound_global_id);
        if let Some(gid) = bound {
            for other in manager.other_live_tracks_bound_to(gid, event.track_id, now, cfg) {
                warnings.push(format!(
                    "global id {gid} is also bound to track {other} on {}",
                    event.camera_id
                ));
            }
        }

        self.events_seen += 1;
        Ok(AssignmentOutcome {
            camera_id: event.camera_id.clone(),
            frame_index: event.frame_index,
            track_id: event.track_id,
            timestamp_ms: event.timestamp_ms,
            gt_identity: event.gt_identity.clone(),
            decision,
            binding,
            expired,
            warnings,
        })
    }

    fn maybe_sweep(&mut self, now: u64, expired: &mut Vec<GlobalId>) {
        let Some(last) = self.last_sweep_ms else {
            self.last_sweep_ms = Some(now);
            return;
        };
        if now - last < self.cfg.expiry_interval_ms {
            return;
        }
        self.last_sweep_ms = Some(now);
        expired.extend(self.gallery.expire(now).identities_pruned);
        for manager in self.cameras.values_mut() {
            manager.prune_lost_tracks(now, &self.cfg);
        }
    }

    /// Feeds an ordered stream through the orchestrator.
    ///
    /// Timestamps may trail the stream clock by at most `order_tolerance_ms`;
    /// anything later aborts with the offending index.
    pub fn run<I>(&mut self, events: I) -> Result<Vec<AssignmentOutcome>, OrchestratorError>
    where
        I: IntoIterator,
        I::Item: std::borrow::Borrow<DetectionEvent>,
    {
        let mut outcomes = Vec::new();
        for (index, event) in events.into_iter().enumerate() {
            outcomes.push(self.process_checked(index, std::borrow::Borrow::borrow(&event))?);
        }
        Ok(outcomes)
    }

    /// [`Orchestrator::process`] with the stream-order check applied.
    pub fn process_checked(
        &mut self,
        index: usize,
        event: &DetectionEvent,
    ) -> Result<AssignmentOutcome, OrchestratorError> {
        if let Some(clock) = self.clock_ms {
            if event.timestamp_ms.saturating_add(self.cfg.order_tolerance_ms) < clock {
                return Err(OrchestratorError::OutOfOrder {
                    index,
                    timestamp_ms: event.timestamp_ms,
                    clock_ms: clock,
                    tolerance_ms: self.cfg.order_tolerance_ms,
                });
            }
        }
        self.process(event).map_err(|e| OrchestratorError::AtEvent {
            index,
            source: Box::new(e),
        })
    }

    pub fn snapshot(&self) -> Vec<u8> {
        self.gallery.snapshot()
    }
}

/// Runs a whole stream from a cold start and returns the outcomes and the
/// final gallery snapshot.
pub fn run_stream<I>(
    events: I,
    cfg: &ValidatedConfig,
) -> Result<(Vec<AssignmentOutcome>, Vec<u8>), OrchestratorError>
where
    I: IntoIterator,
    I::Item: std::borrow::Borrow<DetectionEvent>,
{
    let mut orch = Orchestrator::new(cfg.clone());
    let outcomes = orch.run(events)?;
    Ok((outcomes, orch.snapshot()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemConfig;
    use crate::types::{BBox, Embedding};

    fn cfg() -> ValidatedConfig {
        SystemConfig {
            d: 2,
            k: 4,
            th_emb: 1.0,
            th_score: 0.5,
            ttl_ms: 10_000,
            track_lost_ms: 2_000,
            ..Default::default()
        }
        .validate()
        .unwrap()
    }

    fn ev(cam: &str, track: u64, t: u64, score: f64, e: [f64; 2]) -> DetectionEvent {
        DetectionEvent {
            camera_id: cam.into(),
            frame_index: t / 100,
            timestamp_ms: t,
            track_id: track,
            bbox: BBox { x: 1.0, y: 1.0, w: 5.0, h: 10.0 },
            score,
            embedding: Some(Embedding::new(e.to_vec()).unwrap()),
            gt_identity: None,
        }
    }

    #[test]
    fn duplicate_registration_fails() {
        let mut o = Orchestrator::new(cfg());
        o.register_camera("cam1").unwrap();
        assert!(matches!(o.register_camera("cam1"), Err(OrchestratorError::DuplicateCamera(_))));
    }

    #[test]
    fn unregistered_camera_rejected_without_auto_register() {
        let c = SystemConfig { auto_register: false, ..cfg().into_inner() }.validate().unwrap();
        let mut o = Orchestrator::new(c);
        assert!(matches!(
            o.process(&ev("cam1", 1, 0, 0.9, [0.0, 0.0])),
            Err(OrchestratorError::UnknownCamera(_))
        ));
        o.register_camera("cam1").unwrap();
        assert!(o.process(&ev("cam1", 1, 0, 0.9, [0.0, 0.0])).is_ok());
    }

    #[test]
    fn auto_register_routes_new_camera() {
        let mut o = Orchestrator::new(cfg());
        o.process(&ev("cam9", 1, 0, 0.1, [0.0, 0.0])).unwrap();
        assert_eq!(o.cameras().collect::<Vec<_>>(), vec!["cam9"]);
    }

    #[test]
    fn cold_start_then_cross_camera_match() {
        let mut o = Orchestrator::new(cfg());
        let first = o.process(&ev("cam1", 1, 0, 0.9, [0.0, 0.0])).unwrap();
        assert_eq!(first.decision, Decision::NewIdentity { gid: GlobalId(0) });
        assert_eq!(first.binding, Some(BindingOutcome::FirstBind { gid: GlobalId(0) }));
        let second = o.process(&ev("cam2", 4, 100, 0.9, [0.3, 0.4])).unwrap();
        assert_eq!(second.decision, Decision::Matched { gid: GlobalId(0), distance: 0.5 });
    }

    #[test]
    fn low_score_events_carry_binding() {
        let mut o = Orchestrator::new(cfg());
        assert_eq!(o.process(&ev("cam1", 1, 0, 0.2, [0.0, 0.0])).unwrap().decision, Decision::Filtered);
        o.process(&ev("cam1", 1, 100, 0.9, [0.0, 0.0])).unwrap();
        let out = o.process(&ev("cam1", 1, 200, 0.2, [5.0, 5.0])).unwrap();
        assert_eq!(out.decision, Decision::Maintained { gid: GlobalId(0) });
        assert!(out.binding.is_none());
    }

    #[test]
    fn expiry_yields_fresh_identity() {
        let mut o = Orchestrator::new(cfg());
        o.process(&ev("cam1", 1, 0, 0.9, [0.0, 0.0])).unwrap();
        // Another person keeps the stream clock moving.
        o.process(&ev("cam2", 1, 5_000, 0.9, [9.0, 9.0])).unwrap();
        let back = o.process(&ev("cam1", 2, 10_001, 0.9, [0.0, 0.0])).unwrap();
        assert_eq!(back.decision, Decision::NewIdentity { gid: GlobalId(2) });
        assert!(back.expired.contains(&GlobalId(0)));
    }

    #[test]
    fn exactly_ttl_still_matches() {
        let mut o = Orchestrator::new(cfg());
        o.process(&ev("cam1", 1, 0, 0.9, [0.0, 0.0])).unwrap();
        let back = o.process(&ev("cam1", 2, 10_000, 0.9, [0.0, 0.0])).unwrap();
        assert_eq!(back.decision, Decision::Matched { gid: GlobalId(0), distance: 0.0 });
    }

    #[test]
    fn duplicate_binding_in_one_camera_warns() {
        let mut o = Orchestrator::new(cfg());
        o.process(&ev("cam1", 1, 0, 0.9, [0.0, 0.0])).unwrap();
        let out = o.process(&ev("cam1", 2, 100, 0.9, [0.1, 0.0])).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("track 1"));
        // A different camera sharing the id is normal cross-camera tracking.
        let out = o.process(&ev("cam2", 1, 200, 0.9, [0.1, 0.0])).unwrap();
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn out_of_order_reports_index() {
        let events = vec![
            ev("cam1", 1, 100, 0.2, [0.0, 0.0]),
            ev("cam2", 1, 200, 0.2, [0.0, 0.0]),
            ev("cam3", 1, 150, 0.2, [0.0, 0.0]),
        ];
        match run_stream(&events, &cfg()) {
            Err(OrchestratorError::OutOfOrder { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
        let tolerant = SystemConfig { order_tolerance_ms: 50, ..cfg().into_inner() }.validate().unwrap();
        assert_eq!(run_stream(&events, &tolerant).unwrap().0.len(), 3);
    }

    #[test]
    fn empty_stream() {
        let (outcomes, snapshot) = run_stream(Vec::<DetectionEvent>::new(), &cfg()).unwrap();
        assert!(outcomes.is_empty());
        assert!(Gallery::restore(&snapshot).unwrap().is_empty());
    }

    #[test]
    fn malformed_event_is_reported_with_index() {
        let mut bad = ev("cam1", 1, 0, 0.9, [0.0, 0.0]);
        bad.score = 2.0;
        let err = run_stream([bad], &cfg()).unwrap_err();
        assert!(matches!(err, OrchestratorError::AtEvent { index: 0, .. }));
    }
}
