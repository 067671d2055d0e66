//! Save the gallery halfway through a stream, restore it into a fresh
//! orchestrator and check that the second half plays out the same.
//!
//! cargo run --example snapshot_restore

use osreid::gallery::Gallery;
use osreid::sim::{generate, standard_system_config, ScenarioConfig};
use osreid::Orchestrator;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (events, _) = generate(&ScenarioConfig::standard_desk())?;
    let cfg = standard_system_config().validate()?;
    let (first, second) = events.split_at(events.len() / 2);

    let mut straight = Orchestrator::new(cfg.clone());
    straight.run(first)?;
    let bytes = straight.snapshot();
    let expected = straight.run(second)?;

    let gallery = Gallery::restore(&bytes)?;
    println!("snapshot: {:?}", gallery.summary());
    let mut resumed = Orchestrator::with_gallery(cfg, gallery);
    let replayed = resumed.run(second)?;

    // Track bindings are not part of the snapshot, so only gallery decisions
    // are expected to line up exactly.
    let probes: Vec<_> = expected.iter().zip(&replayed).filter(|(a, _)| a.decision.is_probe()).collect();
    let same = probes.iter().filter(|(a, b)| a.decision == b.decision).count();
    println!("{same} of {} gallery decisions identical after restore", probes.len());
    println!("final snapshots equal: {}", straight.snapshot() == resumed.snapshot());
    Ok(())
}
