//! Derive th_emb from labelled embeddings: the mean, over classes, of the
//! distance to the nearest other class centroid.
//!
//! cargo run --example calibrate_threshold

use osreid::gallery::calibrate_th_emb;
use osreid::sim::{generate, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = ScenarioConfig {
        duration_ms: 10_000,
        occlusion_rate: 0.0,
        clothing_change_events: vec![],
        ..ScenarioConfig::default()
    };
    let (events, _) = generate(&scenario)?;
    let labeled: Vec<_> = events
        .iter()
        .filter_map(|e| Some((e.gt_identity.clone()?, e.embedding.clone()?)))
        .collect();

    let th = calibrate_th_emb(&labeled)?;
    println!("{} labelled embeddings from {} people", labeled.len(), scenario.num_identities);
    println!("calibrated th_emb = {th:.3}");
    println!("(latents were drawn at least {} apart)", scenario.class_separation);
    Ok(())
}
