//! Find the largest th_emb whose false target rate stays at or below 1% on the
//! standard desk scenario, then report the true target rate there.
//!
//! cargo run --release --example ftr_operating_point [target]

use osreid::eval::{operating_point, ThresholdGrid};
use osreid::sim::{generate, standard_system_config, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let target: f64 = std::env::args().nth(1).map_or(Ok(0.01), |s| s.parse())?;
    let (events, _) = generate(&ScenarioConfig::standard_desk())?;
    let op = operating_point(&events, &standard_system_config(), target, ThresholdGrid::default())?;

    println!("grid points evaluated:");
    for (th, ftr) in &op.evaluations {
        println!("  th_emb {th:6.2}  FTR {ftr:.4}");
    }
    println!(
        "\nth_emb = {:.2}  FTR = {:.4}  TTR = {:.4}  (N_nt = {}, N_t = {})",
        op.th_emb,
        op.report.ftr.unwrap_or(0.0),
        op.report.ttr.unwrap_or(0.0),
        op.report.n_nt,
        op.report.n_t
    );
    Ok(())
}
