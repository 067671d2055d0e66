//! Enroll, match and expire identities in a bare gallery.
//!
//! cargo run --example gallery_basics

use osreid::gallery::{Gallery, RetrievalResult};
use osreid::{Embedding, SystemConfig};

fn emb(v: &[f64]) -> Embedding {
    Embedding::new(v.to_vec()).expect("finite values")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SystemConfig { d: 2, k: 3, th_emb: 1.5, ttl_ms: 5_000, ..Default::default() }.validate()?;
    let mut gallery = Gallery::new(&cfg);

    for (t, probe) in [(0, [0.0, 0.0]), (100, [10.0, 0.0]), (200, [0.4, 0.3]), (300, [9.0, 0.5])] {
        let assignment = gallery.observe(&emb(&probe), t)?;
        println!("t={t:<4} {probe:?} -> {assignment:?}");
    }

    for rec in gallery.identities() {
        println!("{}: {} slots, centroid {:?}", rec.global_id(), rec.len(), rec.centroid());
    }

    match gallery.query(&emb(&[5.0, 5.0]))? {
        RetrievalResult::RejectedAsNew { min_distance } => {
            println!("(5,5) is nobody we know, nearest centroid at {min_distance:.3}")
        }
        other => println!("(5,5) -> {other:?}"),
    }

    let report = gallery.expire(5_250);
    println!("expire at 5250 ms: {report:?}");
    println!("next new identity would be {}", gallery.next_global_id());
    Ok(())
}
