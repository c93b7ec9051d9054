//! Runs a handful of seeded variants of every model and prints their
//! fitness, checksum and per-variant cost.
//!
//! cargo run --example simulate_variants -- [steps]

use std::time::Instant;

use hetbench::simkernel::{self, ModelKind};

fn main() {
    let steps: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);

    println!("{:<14} {:>6} {:>6} {:>12} {:>18} {:>12}", "model", "bodies", "seed", "fitness_m", "checksum", "us/variant");
    for kind in ModelKind::ALL {
        let start = Instant::now();
        let results: Vec<_> = (0..8)
            .map(|seed| simkernel::simulate(kind, seed, steps).expect("stable model"))
            .collect();
        let per_variant = start.elapsed().as_secs_f64() / results.len() as f64;
        for r in results.iter().take(3) {
            println!(
                "{:<14} {:>6} {:>6} {:>12.6} {:>18x} {:>12.1}",
                kind.name(),
                kind.body_count(),
                r.seed,
                r.fitness(),
                r.checksum,
                per_variant * 1e6
            );
        }
    }

    // same seed, same bits
    let a = simkernel::simulate(ModelKind::Humanoid, 7, steps).unwrap();
    let b = simkernel::simulate(ModelKind::Humanoid, 7, steps).unwrap();
    assert_eq!(a, b);
    println!("humanoid seed 7 is reproducible: checksum {:x}", a.checksum);
}
