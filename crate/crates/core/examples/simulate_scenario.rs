//! Generate the standard desk scenario and write it as an event file.
//!
//! cargo run --example simulate_scenario [out.jsonl]

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;

use osreid::sim::{generate, ScenarioConfig};
use osreid::wire::write_events;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = ScenarioConfig::standard_desk();
    let (events, gt) = generate(&scenario)?;

    let mut per_camera: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &events {
        *per_camera.entry(&e.camera_id).or_default() += 1;
    }
    println!("{} events over {} ms", events.len(), scenario.duration_ms);
    for (cam, n) in &per_camera {
        println!("  {cam}: {n}");
    }
    let high = events.iter().filter(|e| e.score > 0.91).count();
    println!("{high} detections score above 0.91");
    for (i, epochs) in gt.latents.iter().enumerate() {
        println!("  person-{i}: {} appearance epochs", epochs.len());
    }

    if let Some(path) = std::env::args().nth(1) {
        write_events(BufWriter::new(File::create(&path)?), scenario.d, &events)?;
        println!("wrote {path}");
    }
    Ok(())
}
