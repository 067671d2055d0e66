//! Two people walk past three cameras. The same global id follows each of
//! them from camera to camera, and low-confidence frames keep the last
//! binding without touching the gallery.
//!
//! cargo run --example multi_camera

use osreid::{BBox, DetectionEvent, Embedding, Orchestrator, SystemConfig};

fn det(cam: &str, track: u64, t: u64, score: f64, e: [f64; 3], who: &str) -> DetectionEvent {
    DetectionEvent {
        camera_id: cam.into(),
        frame_index: t / 100,
        timestamp_ms: t,
        track_id: track,
        bbox: BBox { x: 0.0, y: 0.0, w: 50.0, h: 120.0 },
        score,
        embedding: Some(Embedding::new(e.to_vec()).expect("finite")),
        gt_identity: Some(who.into()),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SystemConfig { d: 3, th_emb: 1.0, ..Default::default() }.validate()?;
    let mut orch = Orchestrator::new(cfg);

    let stream = [
        det("lobby", 1, 0, 0.95, [0.0, 0.0, 0.0], "ana"),
        det("lobby", 2, 0, 0.97, [5.0, 5.0, 0.0], "ben"),
        det("lobby", 1, 100, 0.40, [0.1, 0.0, 0.0], "ana"),
        det("hall", 7, 2_000, 0.93, [0.2, 0.1, 0.0], "ana"),
        det("hall", 8, 2_100, 0.96, [5.1, 4.9, 0.1], "ben"),
        det("lab", 3, 4_000, 0.99, [4.8, 5.2, 0.0], "ben"),
        det("lab", 4, 4_000, 0.92, [0.0, 0.3, 0.1], "ana"),
    ];
    for event in &stream {
        let out = orch.process(event)?;
        println!(
            "{:>5} track {} ({}) -> {:?}",
            out.camera_id,
            out.track_id,
            out.gt_identity.as_deref().unwrap_or("?"),
            out.decision
        );
    }
    println!("cameras seen: {:?}", orch.cameras().collect::<Vec<_>>());
    println!("identities in gallery: {}", orch.gallery().len());
    Ok(())
}
