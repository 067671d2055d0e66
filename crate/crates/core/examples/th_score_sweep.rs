//! Sweep th_score over the standard desk scenario and print a table with
//! precision, accuracy and TTR per threshold.
//!
//! cargo run --release --example th_score_sweep

use osreid::eval::{format_table, spearman, sweep_th_score};
use osreid::sim::{generate, standard_system_config, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = ScenarioConfig::standard_desk();
    let (events, _) = generate(&scenario)?;
    let cfg = standard_system_config();

    let thresholds: Vec<f64> = (0..10).map(|i| (99 - i) as f64 / 100.0).collect();
    let rows = sweep_th_score(&events, &cfg, &thresholds, true)?;
    print!("{}", format_table("th_score", &rows));

    let (ths, ttrs): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| Some((r.threshold, r.report.ttr?)))
        .unzip();
    if let Some(rho) = spearman(&ths, &ttrs) {
        println!("\nSpearman(th_score, TTR) = {rho:.3}");
    }
    Ok(())
}
