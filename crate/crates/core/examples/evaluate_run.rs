//! Run the engine over a labelled stream and score it with target and
//! non-target rates.
//!
//! cargo run --example evaluate_run

use osreid::eval::{judge, report, GroundTruth, Verdict};
use osreid::sim::{generate, standard_system_config, ScenarioConfig};
use osreid::run_stream;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (events, _) = generate(&ScenarioConfig::standard_desk())?;
    let cfg = standard_system_config().validate()?;
    let (outcomes, _) = run_stream(&events, &cfg)?;

    let judgments = judge(&outcomes, &GroundTruth::from_events(&events))?;
    let r = report(&judgments).with_config(cfg.th_score, cfg.th_emb);
    print!("{}", r.to_text());

    // The misses cluster right after someone changes clothes.
    let misses: Vec<_> = judgments.iter().filter(|j| j.verdict == Verdict::T2nt).collect();
    println!("\nfirst target misses:");
    for j in misses.iter().take(5) {
        let e = &events[j.index];
        println!("  t={} {} {}", e.timestamp_ms, e.camera_id, j.gt_identity);
    }
    Ok(())
}
