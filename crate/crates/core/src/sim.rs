//! Deterministic synthetic multi-camera world with ground-truth labels.
//!
//! Identities are latent points in embedding space. Each identity walks the
//! cameras round-robin, dwelling a random time in each and spending
//! `transit_ms` between cameras. While inside a camera it produces one
//! detection per frame: the embedding is the current latent plus Gaussian
//! noise, and the score comes from a clean or an occluded model. Occluded
//! detections get noisier embeddings, so low scores go with bad appearance.
//!
//! Clothing changes shift an identity's latent from a given time onward.
//! Absence windows silence an identity completely.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, SystemConfig};
use crate::types::{seeded_rng, BBox, DetectionEvent, Embedding};

const MAX_SEPARATION_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(#[from] ConfigError),
    #[error("could not place identity {identity} at separation {separation} after {attempts} attempts")]
    ImpossibleSeparation {
        identity: usize,
        separation: f64,
        attempts: usize,
    },
    #[error("switch rate {0} outside [0, 1]")]
    BadRate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    pub mean: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClothingChange {
    pub identity: usize,
    pub time_ms: u64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsenceWindow {
    pub identity: usize,
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_identities: usize,
    pub num_cameras: usize,
    pub duration_ms: u64,
    pub frame_interval_ms: u64,
    pub d: usize,
    /// Minimum pairwise distance between latent identity vectors.
    pub class_separation: f64,
    /// Per-dimension standard deviation of the latent sampling distribution.
    pub latent_scale: f64,
    /// Per-dimension noise on emitted embeddings.
    pub noise_sigma: f64,
    pub occlusion_rate: f64,
    /// Noise multiplier for occluded detections.
    pub occlusion_noise_factor: f64,
    pub score_clean: ScoreModel,
    pub score_occluded: ScoreModel,
    pub clothing_change_events: Vec<ClothingChange>,
    pub absence_windows: Vec<AbsenceWindow>,
    pub dwell_min_ms: u64,
    pub dwell_max_ms: u64,
    pub transit_ms: u64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    /// The standard desk scenario: 5 people, 8 cameras, one minute of video.
    fn default() -> Self {
        let clothing_change_events = (0..5)
            .flat_map(|i| {
                [20_000u64, 40_000].map(|t| ClothingChange {
                    identity: i,
                    time_ms: t + 1_500 * i as u64,
                    magnitude: 35.0,
                })
            })
            .collect();
        Self {
            num_identities: 5,
            num_cameras: 8,
            duration_ms: 60_000,
            frame_interval_ms: 100,
            d: 128,
            class_separation: 40.0,
            latent_scale: 5.0,
            noise_sigma: 1.0,
            occlusion_rate: 0.3,
            occlusion_noise_factor: 4.0,
            score_clean: ScoreModel { mean: 0.94, sigma: 0.03 },
            score_occluded: ScoreModel { mean: 0.55, sigma: 0.12 },
            clothing_change_events,
            absence_windows: Vec::new(),
            dwell_min_ms: 3_000,
            dwell_max_ms: 8_000,
            transit_ms: 1_000,
            seed: 2024,
        }
    }
}

impl ScenarioConfig {
    pub fn standard_desk() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let rate_ok = |v: f64| (0.0..=1.0).contains(&v);
        if self.num_identities < 1 {
            return Err(ConfigError::new("num_identities", "num_identities must be ≥ 1"));
        }
        if self.num_cameras < 1 {
            return Err(ConfigError::new("num_cameras", "num_cameras must be ≥ 1"));
        }
        if self.frame_interval_ms == 0 {
            return Err(ConfigError::new("frame_interval_ms", "frame_interval_ms must be positive"));
        }
        if self.d < 1 {
            return Err(ConfigError::new("d", "d must be ≥ 1"));
        }
        if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
            return Err(ConfigError::new("class_separation", "class_separation must be > 0"));
        }
        if !(self.latent_scale >= 0.0 && self.latent_scale.is_finite()) {
            return Err(ConfigError::new("latent_scale", "latent_scale must be ≥ 0"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(ConfigError::new("noise_sigma", "noise_sigma must be ≥ 0"));
        }
        if !rate_ok(self.occlusion_rate) {
            return Err(ConfigError::new("occlusion_rate", "occlusion_rate must be in [0, 1]"));
        }
        if !(self.occlusion_noise_factor >= 0.0 && self.occlusion_noise_factor.is_finite()) {
            return Err(ConfigError::new("occlusion_noise_factor", "occlusion_noise_factor must be ≥ 0"));
        }
        for (field, m) in [("score_clean", self.score_clean), ("score_occluded", self.score_occluded)] {
            if !(m.mean.is_finite() && m.sigma >= 0.0 && m.sigma.is_finite()) {
                return Err(ConfigError::new(field, format!("{field} needs a finite mean and sigma ≥ 0")));
            }
        }
        if self.dwell_min_ms == 0 || self.dwell_max_ms < self.dwell_min_ms {
            return Err(ConfigError::new("dwell_min_ms", "need 0 < dwell_min_ms ≤ dwell_max_ms"));
        }
        for c in &self.clothing_change_events {
            if c.identity >= self.num_identities || !(c.magnitude >= 0.0 && c.magnitude.is_finite()) {
                return Err(ConfigError::new(
                    "clothing_change_events",
                    format!("bad clothing change {c:?}"),
                ));
            }
        }
        for a in &self.absence_windows {
            if a.identity >= self.num_identities || a.end_ms < a.start_ms {
                return Err(ConfigError::new("absence_windows", format!("bad absence window {a:?}")));
            }
        }
        Ok(())
    }
}

/// The engine configuration paired with the standard desk scenario.
pub fn standard_system_config() -> SystemConfig {
    SystemConfig {
        d: ScenarioConfig::default().d,
        ..SystemConfig::default()
    }
}

/// A latent vector valid from `from_ms` until the next epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentEpoch {
    pub from_ms: u64,
    pub latent: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthIndex {
    /// One label per emitted event, aligned with the stream.
    pub labels: Vec<String>,
    /// Per identity, the latent vector history in time order.
    pub latents: Vec<Vec<LatentEpoch>>,
}

impl GroundTruthIndex {
    pub fn latent_at(&self, identity: usize, t_ms: u64) -> &[f64] {
        let epochs = &self.latents[identity];
        let idx = epochs.partition_point(|e| e.from_ms <= t_ms).saturating_sub(1);
        &epochs[idx].latent
    }
}

pub fn identity_label(identity: usize) -> String {
    format!("person-{identity}")
}

pub fn camera_label(camera: usize) -> String {
    format!("cam{}", camera + 1)
}

#[derive(Debug, Clone)]
struct Visit {
    camera: usize,
    start_ms: u64,
    end_ms: u64,
}

fn sample_latents(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>, SimError> {
    let normal = Normal::new(0.0, cfg.latent_scale).expect("validated scale");
    let mut latents: Vec<Vec<f64>> = Vec::with_capacity(cfg.num_identities);
    for identity in 0..cfg.num_identities {
        let mut placed = false;
        for _ in 0..MAX_SEPARATION_ATTEMPTS {
            let candidate: Vec<f64> = (0..cfg.d).map(|_| normal.sample(rng)).collect();
            let far_enough = latents
                .iter()
                .all(|other| crate::types::l2_unchecked(other, &candidate) >= cfg.class_separation);
            if far_enough {
                latents.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SimError::ImpossibleSeparation {
                identity,
                separation: cfg.class_separation,
                attempts: MAX_SEPARATION_ATTEMPTS,
            });
        }
    }
    Ok(latents)
}

fn random_direction(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let v: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn schedule(cfg: &ScenarioConfig, identity: usize, rng: &mut impl Rng) -> Vec<Visit> {
    let mut visits = Vec::new();
    let mut camera = identity % cfg.num_cameras;
    let mut t = if cfg.transit_ms > 0 {
        rng.random_range(0..=cfg.transit_ms)
    } else {
        0
    };
    while t < cfg.duration_ms {
        let dwell = rng.random_range(cfg.dwell_min_ms..=cfg.dwell_max_ms);
        visits.push(Visit {
            camera,
            start_ms: t,
            end_ms: t + dwell,
        });
        t += dwell + cfg.transit_ms;
        camera = (camera + 1) % cfg.num_cameras;
    }
    visits
}

/// Generates a labeled event stream ordered by (timestamp, camera, identity).
pub fn generate(cfg: &ScenarioConfig) -> Result<(Vec<DetectionEvent>, GroundTruthIndex), SimError> {
    cfg.validate()?;
    let mut rng = seeded_rng(cfg.seed);
    let base = sample_latents(cfg, &mut rng)?;

    let mut latents: Vec<Vec<LatentEpoch>> = base
        .into_iter()
        .map(|latent| vec![LatentEpoch { from_ms: 0, latent }])
        .collect();
    let mut changes = cfg.clothing_change_events.clone();
    changes.sort_by_key(|c| (c.time_ms, c.identity));
    for change in &changes {
        let dir = random_direction(cfg.d, &mut rng);
        let history = &mut latents[change.identity];
        let prev = history.last().expect("base epoch").latent.clone();
        let shifted: Vec<f64> = prev
            .iter()
            .zip(&dir)
            .map(|(p, u)| p + change.magnitude * u)
            .collect();
        if history.last().is_some_and(|e| e.from_ms == change.time_ms) {
            history.last_mut().unwrap().latent = shifted;
        } else {
            history.push(LatentEpoch { from_ms: change.time_ms, latent: shifted });
        }
    }
    let gt = GroundTruthIndex { labels: Vec::new(), latents };

    let schedules: Vec<Vec<Visit>> = (0..cfg.num_identities)
        .map(|i| schedule(cfg, i, &mut rng))
        .collect();

    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let clean = Normal::new(cfg.score_clean.mean, cfg.score_clean.sigma).expect("validated");
    let occluded = Normal::new(cfg.score_occluded.mean, cfg.score_occluded.sigma).expect("validated");

    let mut next_track = vec![1u64; cfg.num_cameras];
    let mut track_of: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut events = Vec::new();
    let mut labels = Vec::new();

    let mut t = 0;
    while t < cfg.duration_ms {
        let frame_index = t / cfg.frame_interval_ms;
        for camera in 0..cfg.num_cameras {
            for (identity, visits) in schedules.iter().enumerate() {
                let Some((visit_no, visit)) = visits
                    .iter()
                    .enumerate()
                    .find(|(_, v)| v.camera == camera && v.start_ms <= t && t < v.end_ms)
                else {
                    continue;
                };
                let absent = cfg
                    .absence_windows
                    .iter()
                    .any(|a| a.identity == identity && a.start_ms <= t && t < a.end_ms);
                if absent {
                    continue;
                }
                let track_id = *track_of.entry((identity, visit_no)).or_insert_with(|| {
                    let id = next_track[camera];
                    next_track[camera] += 1;
                    id
                });

                let is_occluded = rng.random::<f64>() < cfg.occlusion_rate;
                let score_model = if is_occluded { &occluded } else { &clean };
                let score = score_model.sample(&mut rng).clamp(0.0, 1.0);
                let sigma = if is_occluded {
                    cfg.noise_sigma * cfg.occlusion_noise_factor
                } else {
                    cfg.noise_sigma
                };
                let embedding: Vec<f64> = gt
                    .latent_at(identity, t)
                    .iter()
                    .map(|m| m + sigma * noise.sample(&mut rng))
                    .collect();
                let progress = (t - visit.start_ms) as f64 / (visit.end_ms - visit.start_ms) as f64;

                events.push(DetectionEvent {
                    camera_id: camera_label(camera),
                    frame_index,
                    timestamp_ms: t,
                    track_id,
                    bbox: BBox {
                        x: 20.0 + 500.0 * progress,
                        y: 60.0 + 30.0 * identity as f64,
                        w: 64.0,
                        h: 160.0,
                    },
                    score,
                    embedding: Some(Embedding::new(embedding).expect("finite by construction")),
                    gt_identity: Some(identity_label(identity)),
                });
                labels.push(identity_label(identity));
            }
        }
        t += cfg.frame_interval_ms;
    }

    Ok((events, GroundTruthIndex { labels, ..gt }))
}

/// A track-id exchange applied from `frame_index` onward.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedSwitch {
    pub camera_id: String,
    pub frame_index: u64,
    pub track_a: u64,
    pub track_b: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedStream {
    pub events: Vec<DetectionEvent>,
    pub switches: Vec<InjectedSwitch>,
}

/// Models tracker identity switches: for every pair of tracks that share at
/// least one frame in a camera, with probability `rate`, exchange their
/// track ids from a random shared frame onward. Labels, timestamps, scores and
/// embeddings are untouched.
pub fn inject_track_switches(
    stream: &[DetectionEvent],
    rate: f64,
    seed: u64,
) -> Result<SwitchedStream, SimError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(SimError::BadRate(rate));
    }
    let mut rng = seeded_rng(seed);

    let mut frames: BTreeMap<&str, BTreeMap<u64, BTreeSet<u64>>> = BTreeMap::new();
    for e in stream {
        frames
            .entry(e.camera_id.as_str())
            .or_default()
            .entry(e.track_id)
            .or_default()
            .insert(e.frame_index);
    }

    let mut switches = Vec::new();
    for (camera, tracks) in &frames {
        let ids: Vec<u64> = tracks.keys().copied().collect();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                let shared: Vec<u64> = tracks[&a].intersection(&tracks[&b]).copied().collect();
                if shared.is_empty() {
                    continue;
                }
                if rng.random::<f64>() >= rate {
                    continue;
                }
                // Keep at least one frame before the switch when possible.
                let frame_index = if shared.len() > 1 {
                    shared[rng.random_range(1..shared.len())]
                } else {
                    shared[0]
                };
                switches.push(InjectedSwitch {
                    camera_id: (*camera).to_owned(),
                    frame_index,
                    track_a: a,
                    track_b: b,
                });
            }
        }
    }
    switches.sort_by(|x, y| (&x.camera_id, x.frame_index).cmp(&(&y.camera_id, y.frame_index)));

    // Per camera, the current relabeling of original ids.
    let mut mapping: BTreeMap<&str, BTreeMap<u64, u64>> = BTreeMap::new();
    let mut applied: BTreeMap<&str, usize> = BTreeMap::new();
    let mut events = Vec::with_capacity(stream.len());
    for e in stream {
        let cam = e.camera_id.as_str();
        let pending: Vec<&InjectedSwitch> =
            switches.iter().filter(|s| s.camera_id == cam).collect();
        let done = applied.entry(cam).or_insert(0);
        let map = mapping.entry(cam).or_default();
        while *done < pending.len() && pending[*done].frame_index <= e.frame_index {
            let s = pending[*done];
            for v in map.values_mut() {
                if *v == s.track_a {
                    *v = s.track_b;
                } else if *v == s.track_b {
                    *v = s.track_a;
                }
            }
            map.entry(s.track_a).or_insert(s.track_b);
            map.entry(s.track_b).or_insert(s.track_a);
            *done += 1;
        }
        let mut out = e.clone();
        out.track_id = *map.get(&e.track_id).unwrap_or(&e.track_id);
        events.push(out);
    }

    Ok(SwitchedStream { events, switches })
}
