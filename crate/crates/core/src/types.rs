//! Shared domain types: embeddings, detection events, global identities.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("embedding element {index} is not finite")]
    NonFinite { index: usize },
    #[error("embedding must not be empty")]
    Empty,
}

/// Appearance feature vector produced by the upstream re-identification model.
///
/// Elements are guaranteed finite. The dimension is checked against the
/// configured `d` wherever two embeddings meet.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, TypeError> {
        if values.is_empty() {
            return Err(TypeError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(TypeError::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn check_dim(&self, expected: usize) -> Result<(), TypeError> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(TypeError::DimensionMismatch {
                expected,
                actual: self.dim(),
            })
        }
    }
}

impl<'de> Deserialize<'de> for Embedding {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(deserializer)?;
        Embedding::new(values).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = TypeError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Embedding::new(values)
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Identity issued by the gallery and shared across cameras.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GlobalId(pub u64);

impl fmt::Display for GlobalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// One tracked detection from one camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub camera_id: String,
    pub frame_index: u64,
    pub timestamp_ms: u64,
    pub track_id: u64,
    pub bbox: BBox,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Embedding>,
    /// Simulator ground truth. Carried through for evaluation, never read by the engine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_identity: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EventError {
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("bbox must have positive width and height, got w={w} h={h}")]
    DegenerateBox { w: f64, h: f64 },
    #[error("embedding: {0}")]
    Embedding(#[from] TypeError),
}

impl DetectionEvent {
    /// Checks the per-event invariants that do not depend on stream context.
    pub fn validate(&self, dim: usize) -> Result<(), EventError> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(EventError::ScoreOutOfRange(self.score));
        }
        if !(self.bbox.w > 0.0 && self.bbox.h > 0.0) {
            return Err(EventError::DegenerateBox {
                w: self.bbox.w,
                h: self.bbox.h,
            });
        }
        if let Some(e) = &self.embedding {
            e.check_dim(dim)?;
        }
        Ok(())
    }
}

/// Euclidean distance between two embeddings of equal dimension.
pub fn l2_distance(a: &Embedding, b: &Embedding) -> Result<f64, TypeError> {
    b.check_dim(a.dim())?;
    Ok(l2_unchecked(a.as_slice(), b.as_slice()))
}

/// Sequential sum of squared differences. Callers guarantee equal lengths.
#[inline]
pub(crate) fn l2_unchecked(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc.sqrt()
}

/// Deterministic generator used by every seeded component.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
