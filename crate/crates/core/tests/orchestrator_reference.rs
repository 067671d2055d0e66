//! The orchestrator against a naive reference interpreter that rescans
//! everything on every event.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use osreid::config::ConflictPolicy;
use osreid::sim::{generate, ScenarioConfig};
use osreid::{run_stream, Decision, DetectionEvent, Orchestrator, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
enum RefDecision {
    Filtered,
    Maintained(u64),
    Matched(u64, f64),
    New(u64),
}

struct RefTrack {
    bound: Option<u64>,
    votes: VecDeque<u64>,
    last_seen: u64,
}

fn centroid(slots: &[(Vec<f64>, u64)]) -> Vec<f64> {
    let mut c = vec![0.0; slots[0].0.len()];
    for (e, _) in slots {
        for (a, v) in c.iter_mut().zip(e) {
            *a += v;
        }
    }
    c.iter().map(|v| v / slots.len() as f64).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn reference(events: &[DetectionEvent], cfg: &SystemConfig) -> Vec<RefDecision> {
    let mut gallery: Vec<(u64, Vec<(Vec<f64>, u64)>)> = Vec::new();
    let mut next_id = 0;
    let mut tracks: BTreeMap<(String, u64), RefTrack> = BTreeMap::new();
    let mut clock = 0;
    let mut out = Vec::new();

    for e in events {
        clock = clock.max(e.timestamp_ms);
        let key = (e.camera_id.clone(), e.track_id);
        let fresh = RefTrack { bound: None, votes: VecDeque::new(), last_seen: e.timestamp_ms };
        let track = tracks.entry(key).or_insert(fresh);
        if e.timestamp_ms.saturating_sub(track.last_seen) > cfg.track_lost_ms {
            *track = RefTrack { bound: None, votes: VecDeque::new(), last_seen: e.timestamp_ms };
        }
        track.last_seen = track.last_seen.max(e.timestamp_ms);

        if e.score > cfg.th_score {
            let probe = e.embedding.as_ref().unwrap().as_slice();
            for (_, slots) in &mut gallery {
                slots.retain(|(_, t)| clock - t <= cfg.ttl_ms);
            }
            gallery.retain(|(_, s)| !s.is_empty());

            let mut best: Option<(usize, f64)> = None;
            for (i, (_, slots)) in gallery.iter().enumerate() {
                let d = dist(probe, &centroid(slots));
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((i, d));
                }
            }
            let (gid, decision) = match best {
                Some((i, d)) if d <= cfg.th_emb => {
                    let slots = &mut gallery[i].1;
                    if slots.len() == cfg.k {
                        slots.remove(0);
                    }
                    slots.push((probe.to_vec(), clock));
                    (gallery[i].0, RefDecision::Matched(gallery[i].0, d))
                }
                _ => {
                    gallery.push((next_id, vec![(probe.to_vec(), clock)]));
                    next_id += 1;
                    (next_id - 1, RefDecision::New(next_id - 1))
                }
            };
            let window = match cfg.conflict_policy {
                ConflictPolicy::VoteLastN(n) => n,
                _ => 1,
            };
            track.votes.push_back(gid);
            if track.votes.len() > window {
                track.votes.pop_front();
            }
            track.bound = Some(match (track.bound, cfg.conflict_policy) {
                (None, _) => gid,
                (Some(_), ConflictPolicy::LatestWins) => gid,
                (Some(b), ConflictPolicy::Sticky) => b,
                (Some(b), ConflictPolicy::VoteLastN(n)) => {
                    let votes = track.votes.iter().filter(|v| **v == gid).count();
                    if 2 * votes > n { gid } else { b }
                }
            });
            out.push(decision);
        } else if let Some(b) = track.bound {
            out.push(RefDecision::Maintained(b));
        } else {
            out.push(RefDecision::Filtered);
        }
    }
    out
}

fn engine(events: &[DetectionEvent], cfg: &SystemConfig) -> Vec<RefDecision> {
    let (outcomes, _) = run_stream(events, &cfg.clone().validate().unwrap()).unwrap();
    outcomes
        .iter()
        .map(|o| match o.decision {
            Decision::Filtered => RefDecision::Filtered,
            Decision::Maintained { gid } => RefDecision::Maintained(gid.0),
            Decision::Matched { gid, distance } => RefDecision::Matched(gid.0, distance),
            Decision::NewIdentity { gid } => RefDecision::New(gid.0),
        })
        .collect()
}

fn busy_scenario() -> ScenarioConfig {
    ScenarioConfig {
        num_identities: 20,
        num_cameras: 6,
        duration_ms: 90_000,
        d: 32,
        class_separation: 25.0,
        ..ScenarioConfig::default()
    }
}

fn assert_equivalent(events: &[DetectionEvent], cfg: &SystemConfig) {
    let want = reference(events, cfg);
    let got = engine(events, cfg);
    assert_eq!(got.len(), want.len());
    for (i, (g, w)) in got.iter().zip(&want).enumerate() {
        let same = match (g, w) {
            (RefDecision::Matched(a, da), RefDecision::Matched(b, db)) => {
                a == b && (da - db).abs() <= 1e-9 * da.max(1.0)
            }
            _ => g == w,
        };
        assert!(same, "event {i}: engine {g:?}, reference {w:?}");
    }
}

#[test]
fn matches_reference_on_a_ten_thousand_event_stream() {
    let (events, _) = generate(&busy_scenario()).unwrap();
    assert!(events.len() >= 10_000, "only {} events", events.len());
    for (policy, ttl_ms, th_emb) in [
        (ConflictPolicy::LatestWins, 600_000, 19.95),
        (ConflictPolicy::LatestWins, 4_000, 12.0),
        (ConflictPolicy::Sticky, 7_000, 19.95),
        (ConflictPolicy::VoteLastN(3), 5_000, 16.0),
    ] {
        let cfg = SystemConfig {
            d: 32,
            conflict_policy: policy,
            ttl_ms,
            th_emb,
            ..SystemConfig::default()
        };
        assert_equivalent(&events, &cfg);
    }
}

#[test]
fn every_event_yields_exactly_one_outcome() {
    let (events, _) = generate(&busy_scenario()).unwrap();
    let cfg = SystemConfig { d: 32, ..SystemConfig::default() }.validate().unwrap();
    let (outcomes, _) = run_stream(&events, &cfg).unwrap();
    assert_eq!(outcomes.len(), events.len());
    for (e, o) in events.iter().zip(&outcomes) {
        assert_eq!((&e.camera_id, e.frame_index, e.track_id), (&o.camera_id, o.frame_index, o.track_id));
    }
    // Every probe is stored exactly once while nothing expires.
    let mut orch = Orchestrator::new(cfg.clone());
    let outs = orch.run(&events).unwrap();
    let probes = outs.iter().filter(|o| o.decision.is_probe()).count();
    let slots: usize = orch.gallery().identities().iter().map(|r| r.len()).sum();
    let full = orch.gallery().identities().iter().filter(|r| r.len() == cfg.k).count();
    assert!(slots <= probes);
    if full == 0 {
        assert_eq!(slots, probes);
    }
}

#[test]
fn noiseless_people_keep_one_id_across_cameras() {
    let scenario = ScenarioConfig {
        noise_sigma: 0.0,
        occlusion_rate: 0.0,
        clothing_change_events: vec![],
        ..ScenarioConfig::default()
    };
    let (events, _) = generate(&scenario).unwrap();
    let cfg = SystemConfig { d: scenario.d, ..SystemConfig::default() }.validate().unwrap();
    let (outcomes, _) = run_stream(&events, &cfg).unwrap();

    let mut ids: BTreeMap<String, BTreeSet<u64>> = BTreeMap::new();
    let mut cams: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (e, o) in events.iter().zip(&outcomes) {
        if let Some(g) = o.decision.gid() {
            ids.entry(e.gt_identity.clone().unwrap()).or_default().insert(g.0);
            cams.entry(e.gt_identity.clone().unwrap()).or_default().insert(e.camera_id.clone());
        }
    }
    assert_eq!(ids.len(), scenario.num_identities);
    for (person, gids) in &ids {
        assert_eq!(gids.len(), 1, "{person} got {gids:?}");
        assert!(cams[person].len() > 1, "{person} never changed camera");
    }
    let distinct: BTreeSet<u64> = ids.values().flatten().copied().collect();
    assert_eq!(distinct.len(), scenario.num_identities);
}

#[test]
fn reid_requests_shrink_as_th_score_rises() {
    let (events, _) = generate(&ScenarioConfig::default()).unwrap();
    let mut last = usize::MAX;
    for i in 0..=20 {
        let th_score = 0.80 + i as f64 * 0.01;
        let cfg = SystemConfig { d: 128, th_score, ..SystemConfig::default() }.validate().unwrap();
        let (outcomes, _) = run_stream(&events, &cfg).unwrap();
        let requests = outcomes.iter().filter(|o| o.decision.is_probe()).count();
        assert!(requests <= last, "th_score {th_score}: {requests} > {last}");
        last = requests;
    }
}
