//! Streaming open-set person re-identification and multi-camera identity
//! tracking.
//!
//! Detections arrive one at a time from any number of cameras. Each camera has
//! a [`trackmgr::TrackManager`] that decides whether a detection is worth a
//! gallery lookup. Confident detections query a shared [`gallery::Gallery`]:
//! a close enough centroid yields that identity, anything else enrolls a new
//! one. The [`orchestrator::Orchestrator`] wires these together and emits one
//! [`orchestrator::AssignmentOutcome`] per event.
//!
//! [`sim`] generates labelled synthetic streams and [`eval`] scores runs with
//! target / non-target rates.
//!
//! ```
//! use osreid::{Orchestrator, SystemConfig};
//! use osreid::sim::{generate, ScenarioConfig};
//!
//! let scenario = ScenarioConfig {
//!     num_identities: 3,
//!     duration_ms: 5_000,
//!     clothing_change_events: vec![],
//!     ..ScenarioConfig::default()
//! };
//! let (events, _) = generate(&scenario).unwrap();
//! let cfg = SystemConfig { d: scenario.d, ..SystemConfig::default() }.validate().unwrap();
//! let outcomes = Orchestrator::new(cfg).run(&events).unwrap();
//! assert_eq!(outcomes.len(), events.len());
//! ```

pub mod config;
pub mod eval;
pub mod gallery;
pub mod orchestrator;
pub mod sim;
pub mod trackmgr;
pub mod types;
pub mod wire;

#[doc(hidden)]
pub mod cli;

pub use config::{ConflictPolicy, SystemConfig, ValidatedConfig};
pub use gallery::{Assignment, Gallery, RetrievalResult};
pub use orchestrator::{run_stream, AssignmentOutcome, Decision, Orchestrator};
pub use types::{BBox, DetectionEvent, Embedding, GlobalId};
