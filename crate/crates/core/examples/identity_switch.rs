//! Two people share one camera and the tracker swaps their track ids
//! halfway. Compare how each conflict policy handles the swap.
//!
//! cargo run --example identity_switch

use osreid::config::ConflictPolicy;
use osreid::sim::{generate, inject_track_switches, ScenarioConfig};
use osreid::{run_stream, SystemConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = ScenarioConfig {
        num_identities: 2,
        num_cameras: 1,
        duration_ms: 20_000,
        dwell_min_ms: 20_000,
        dwell_max_ms: 20_000,
        transit_ms: 0,
        occlusion_rate: 0.0,
        clothing_change_events: vec![],
        ..ScenarioConfig::default()
    };
    let (events, _) = generate(&scenario)?;
    let switched = inject_track_switches(&events, 1.0, 1)?;
    let sw = &switched.switches[0];
    println!("tracks {} and {} swap at frame {}", sw.track_a, sw.track_b, sw.frame_index);

    for policy in [ConflictPolicy::LatestWins, ConflictPolicy::VoteLastN(3), ConflictPolicy::Sticky] {
        let cfg = SystemConfig { d: scenario.d, conflict_policy: policy, ..Default::default() }.validate()?;
        let (outcomes, _) = run_stream(&switched.events, &cfg)?;
        println!("\n{policy:?}");
        for o in outcomes
            .iter()
            .filter(|o| o.frame_index >= sw.frame_index && o.track_id == sw.track_a)
            .filter(|o| o.binding.is_some())
            .take(4)
        {
            println!(
                "  frame {} track {} now shows {} -> {:?}",
                o.frame_index,
                o.track_id,
                o.gt_identity.as_deref().unwrap_or("?"),
                o.binding.unwrap()
            );
        }
    }
    Ok(())
}
