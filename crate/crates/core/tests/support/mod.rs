//! Oracles shared by the integration tests and the acceptance runner.

#![allow(dead_code)]

use std::collections::BTreeMap;

use osreid::config::ConflictPolicy;
use osreid::gallery::{calibrate_th_emb, centroid, Assignment, Gallery, RetrievalResult};
use osreid::sim::{generate, inject_track_switches, ScenarioConfig};
use osreid::types::{seeded_rng, Embedding, GlobalId};
use osreid::{run_stream, AssignmentOutcome, Decision, SystemConfig};
use rand::Rng;

#[derive(Clone, Debug)]
pub struct Model {
    k: usize,
    th_emb: f64,
    ttl_ms: u64,
    next_id: u64,
    // (id, slots as (embedding, inserted_at)), ascending id.
    ids: Vec<(u64, Vec<(Vec<f64>, u64)>)>,
}

pub fn scalar_centroid(slots: &[(Vec<f64>, u64)]) -> Vec<f64> {
    let d = slots[0].0.len();
    let mut c = vec![0.0; d];
    for (e, _) in slots {
        for j in 0..d {
            c[j] += e[j];
        }
    }
    for v in &mut c {
        *v /= slots.len() as f64;
    }
    c
}

pub fn scalar_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..a.len() {
        s += (a[j] - b[j]) * (a[j] - b[j]);
    }
    s.sqrt()
}

enum ModelQuery {
    Empty,
    Match(u64, f64),
    New(f64),
}

impl Model {
    fn query(&self, p: &[f64]) -> ModelQuery {
        let mut best: Option<(u64, f64)> = None;
        for (id, slots) in &self.ids {
            let d = scalar_dist(p, &scalar_centroid(slots));
            match best {
                Some((bid, bd)) if d > bd || (d == bd && bid < *id) => {}
                _ => best = Some((*id, d)),
            }
        }
        match best {
            None => ModelQuery::Empty,
            Some((id, d)) if d <= self.th_emb => ModelQuery::Match(id, d),
            Some((_, d)) => ModelQuery::New(d),
        }
    }

    fn observe(&mut self, p: &[f64], now: u64) -> (bool, u64, f64) {
        match self.query(p) {
            ModelQuery::Match(id, d) => {
                let slots = &mut self.ids.iter_mut().find(|(i, _)| *i == id).unwrap().1;
                slots.push((p.to_vec(), now));
                if slots.len() > self.k {
                    slots.remove(0);
                }
                (true, id, d)
            }
            _ => {
                let id = self.next_id;
                self.next_id += 1;
                self.ids.push((id, vec![(p.to_vec(), now)]));
                (false, id, 0.0)
            }
        }
    }

    fn expire(&mut self, now: u64) -> Vec<u64> {
        let ttl = self.ttl_ms;
        let mut pruned = Vec::new();
        for (id, slots) in &mut self.ids {
            slots.retain(|(_, t)| now - t <= ttl);
            if slots.is_empty() {
                pruned.push(*id);
            }
        }
        self.ids.retain(|(_, s)| !s.is_empty());
        pruned
    }
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn assert_same_state(g: &Gallery, m: &Model, ctx: &str) {
    assert_eq!(g.len(), m.ids.len(), "{ctx}: identity count");
    assert_eq!(g.next_global_id(), GlobalId(m.next_id), "{ctx}: counter");
    for (rec, (id, slots)) in g.identities().iter().zip(&m.ids) {
        assert_eq!(rec.global_id(), GlobalId(*id), "{ctx}");
        let got: Vec<(Vec<f64>, u64)> = rec
            .slots()
            .map(|s| (s.embedding.as_slice().to_vec(), s.inserted_at_ms))
            .collect();
        assert_eq!(&got, slots, "{ctx}: slots of {id}");
        assert!(rec.len() <= m.k);
    }
}

/// One randomized instance, compared step by step: up to 20 identities, K ≤ 8, d ≤ 32.
pub fn run_instance(seed: u64) {
    let mut rng = seeded_rng(seed);
    let d = rng.random_range(1..=32);
    let k = rng.random_range(1..=8);
    let ttl_ms = rng.random_range(50..=2_000);
    let spread = rng.random_range(0.1..3.0);
    let th_emb = rng.random_range(0.0..4.0 * spread);
    let cfg = SystemConfig { d, k, th_emb, ttl_ms, ..Default::default() }.validate().unwrap();
    let mut g = Gallery::new(&cfg);
    let mut m = Model { k, th_emb, ttl_ms, next_id: 0, ids: Vec::new() };

    let n_centers = rng.random_range(1..=20);
    let centers: Vec<Vec<f64>> = (0..n_centers)
        .map(|_| (0..d).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut now = 0u64;

    for step in 0..60 {
        now += rng.random_range(0..=200);
        let probe: Vec<f64> = if !history.is_empty() && rng.random_bool(0.15) {
            // Exact repeats produce distance ties between identical centroids.
            history[rng.random_range(0..history.len())].clone()
        } else {
            let c = &centers[rng.random_range(0..n_centers)];
            c.iter().map(|x| x + rng.random_range(-spread..spread)).collect()
        };
        let emb = Embedding::new(probe.clone()).unwrap();
        let ctx = format!("seed {seed} step {step}");

        match rng.random_range(0..10) {
            0..=1 => {
                let pruned = m.expire(now);
                let report = g.expire(now);
                let got: Vec<u64> = report.identities_pruned.iter().map(|g| g.0).collect();
                assert_eq!(got, pruned, "{ctx}: pruned");
            }
            2..=3 => match (g.query(&emb).unwrap(), m.query(&probe)) {
                (RetrievalResult::GalleryEmpty, ModelQuery::Empty) => {}
                (RetrievalResult::Matched { gid, distance }, ModelQuery::Match(id, d)) => {
                    assert_eq!(gid, GlobalId(id), "{ctx}");
                    assert!(close(distance, d), "{ctx}: {distance} vs {d}");
                }
                (RetrievalResult::RejectedAsNew { min_distance }, ModelQuery::New(d)) => {
                    assert!(close(min_distance, d), "{ctx}");
                }
                (got, _) => panic!("{ctx}: variant differs, engine gave {got:?}"),
            },
            _ => {
                // Keep the instance within 20 live identities.
                if m.ids.len() >= 20 && !matches!(m.query(&probe), ModelQuery::Match(..)) {
                    continue;
                }
                let (matched, id, dist) = m.observe(&probe, now);
                match g.observe(&emb, now).unwrap() {
                    Assignment::MatchedAndStored { gid, distance } => {
                        assert!(matched, "{ctx}: engine matched, model did not");
                        assert_eq!(gid, GlobalId(id), "{ctx}");
                        assert!(close(distance, dist), "{ctx}");
                    }
                    Assignment::NewIdentity { gid } => {
                        assert!(!matched, "{ctx}: model matched, engine did not");
                        assert_eq!(gid, GlobalId(id), "{ctx}");
                    }
                }
                history.push(probe);
            }
        }
        assert_same_state(&g, &m, &ctx);
    }
}

/// Builds a gallery holding exactly the given buffers, through a snapshot.
pub fn gallery_with(d: usize, k: usize, buffers: &[Vec<Vec<f64>>]) -> Gallery {
    let identities: Vec<serde_json::Value> = buffers
        .iter()
        .enumerate()
        .map(|(i, slots)| {
            serde_json::json!({
                "global_id": i,
                "created_at_ms": 0,
                "last_matched_at_ms": slots.len() - 1,
                "slots": slots.iter().enumerate().map(|(t, e)| serde_json::json!({
                    "inserted_at_ms": t,
                    "embedding": e,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let doc = serde_json::json!({
        "format": "osreid-gallery",
        "version": 1,
        "config": {"d": d, "k": k, "th_emb": 1.0, "ttl_ms": 1000},
        "next_global_id": buffers.len(),
        "identities": identities,
    });
    Gallery::restore(&serde_json::to_vec(&doc).unwrap()).unwrap()
}

/// Engine centroids and nearest-centroid search against scalar loops on
/// `n` random (buffer set, probe) pairs.
pub fn check_centroid_pairs(seed: u64, n: usize) {
    let mut rng = seeded_rng(seed);
    let mut pairs = 0;
    while pairs < n {
        let d = rng.random_range(1..=32);
        let k = rng.random_range(1..=8);
        let n_ids = rng.random_range(1..=20);
        let buffers: Vec<Vec<Vec<f64>>> = (0..n_ids)
            .map(|_| {
                let n = rng.random_range(1..=k);
                (0..n)
                    .map(|_| (0..d).map(|_| rng.random_range(-100.0..100.0)).collect())
                    .collect()
            })
            .collect();
        let g = gallery_with(d, k, &buffers);

        let mut oracle_centroids = Vec::new();
        for (rec, buf) in g.identities().iter().zip(&buffers) {
            let slots: Vec<(Vec<f64>, u64)> = buf.iter().map(|e| (e.clone(), 0)).collect();
            let want = scalar_centroid(&slots);
            for (a, b) in centroid(rec).as_slice().iter().zip(&want) {
                assert!(close(*a, *b), "centroid {a} vs {b}");
            }
            oracle_centroids.push(want);
        }

        for _ in 0..10 {
            let probe: Vec<f64> = (0..d).map(|_| rng.random_range(-100.0..100.0)).collect();
            let (mut best_id, mut best_d) = (0, f64::INFINITY);
            for (i, c) in oracle_centroids.iter().enumerate() {
                let dist = scalar_dist(&probe, c);
                if dist < best_d {
                    best_id = i;
                    best_d = dist;
                }
            }
            let (gid, dist) = g.nearest(&Embedding::new(probe).unwrap()).unwrap().unwrap();
            assert_eq!(gid, GlobalId(best_id as u64));
            assert!(close(dist, best_d));
            pairs += 1;
        }
    }
}

pub fn calibration_oracle(labeled: &[(u32, Vec<f64>)]) -> f64 {
    let mut labels: Vec<u32> = labeled.iter().map(|(l, _)| *l).collect();
    labels.sort();
    labels.dedup();
    let d = labeled[0].1.len();
    let centroids: Vec<Vec<f64>> = labels
        .iter()
        .map(|l| {
            let members: Vec<(Vec<f64>, u64)> = labeled
                .iter()
                .filter(|(x, _)| x == l)
                .map(|(_, e)| (e.clone(), 0))
                .collect();
            assert_eq!(members[0].0.len(), d);
            scalar_centroid(&members)
        })
        .collect();
    let mut total = 0.0;
    for i in 0..centroids.len() {
        let mut nearest = f64::INFINITY;
        for j in 0..centroids.len() {
            if i != j {
                nearest = nearest.min(scalar_dist(&centroids[i], &centroids[j]));
            }
        }
        total += nearest;
    }
    total / centroids.len() as f64
}

/// `calibrate_th_emb` against the all-pairs oracle on `n` random instances.
pub fn check_calibration(seed: u64, n: usize) {
    let mut rng = seeded_rng(seed);
    for _ in 0..n {
        let d = rng.random_range(1..=16);
        let classes = rng.random_range(2..=10u32);
        let mut labeled: Vec<(u32, Vec<f64>)> = (0..classes)
            .map(|c| (c, (0..d).map(|_| rng.random_range(-20.0..20.0)).collect()))
            .collect();
        for _ in 0..rng.random_range(0..40) {
            let c = rng.random_range(0..classes);
            labeled.push((c, (0..d).map(|_| rng.random_range(-20.0..20.0)).collect()));
        }
        let want = calibration_oracle(&labeled);
        let input: Vec<(u32, Embedding)> = labeled
            .iter()
            .map(|(l, e)| (*l, Embedding::new(e.clone()).unwrap()))
            .collect();
        assert_eq!(calibrate_th_emb(&input).unwrap(), want);
    }
}


pub fn two_people_one_camera() -> ScenarioConfig {
    ScenarioConfig {
        num_identities: 2,
        num_cameras: 1,
        duration_ms: 20_000,
        dwell_min_ms: 20_000,
        dwell_max_ms: 20_000,
        transit_ms: 0,
        occlusion_rate: 0.0,
        clothing_change_events: vec![],
        ..ScenarioConfig::default()
    }
}

/// For each post-switch track, the bound id after each of its first five
/// high-score frames, plus the id owned by the person now on that track.
/// `None` when the switch lands too close to the end to leave five frames.
pub fn bindings_after_switch(policy: ConflictPolicy, seed: u64) -> Option<Vec<(Vec<GlobalId>, GlobalId)>> {
    let (events, _) = generate(&two_people_one_camera()).unwrap();
    let switched = inject_track_switches(&events, 1.0, seed).unwrap();
    assert_eq!(switched.switches.len(), 1);
    let sw = &switched.switches[0];

    let cfg = SystemConfig { d: 128, conflict_policy: policy, ..SystemConfig::default() };
    let (outcomes, _) = run_stream(&switched.events, &cfg.clone().validate().unwrap()).unwrap();

    let mut owner: BTreeMap<String, GlobalId> = BTreeMap::new();
    for o in &outcomes {
        if let Decision::NewIdentity { gid } = o.decision {
            owner.entry(o.gt_identity.clone().unwrap()).or_insert(gid);
        }
    }
    assert_eq!(owner.len(), 2, "each person enrolls once: {owner:?}");

    [sw.track_a, sw.track_b]
        .iter()
        .map(|&track| {
            let after: Vec<&AssignmentOutcome> = outcomes
                .iter()
                .zip(&switched.events)
                .filter(|(o, e)| o.track_id == track && o.frame_index >= sw.frame_index && e.score > cfg.th_score)
                .map(|(o, _)| o)
                .take(5)
                .collect();
            if after.len() < 5 {
                return None;
            }
            let person = after[0].gt_identity.clone().unwrap();
            let bound = after.iter().map(|o| o.binding.unwrap().bound()).collect();
            Some((bound, owner[&person]))
        })
        .collect()
}

/// The first ten seeds whose switch leaves room to observe recovery.
pub fn switch_cases(policy: ConflictPolicy) -> Vec<(u64, Vec<(Vec<GlobalId>, GlobalId)>)> {
    let found: Vec<_> = (0..40)
        .filter_map(|seed| bindings_after_switch(policy, seed).map(|b| (seed, b)))
        .take(10)
        .collect();
    assert_eq!(found.len(), 10);
    found
}

