//! A small modeled sweep written to disk, resumed, and turned into figures.
//!
//! cargo run --example sweep_and_plot -- [output_dir]

use std::path::PathBuf;

use hetbench::bench::{emit_figures, expected_row_count, run_sweep, SweepConfig};
use hetbench::{DevicePerfModel, ModelKind};

fn main() {
    let out: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("hetbench-sweep-example"));

    let mut config = SweepConfig::new(vec![ModelKind::Box, ModelKind::ArmWithRope]);
    config.variants_per_model.insert(ModelKind::Box, vec![32, 128, 512, 2048]);
    config.variants_per_model.insert(ModelKind::ArmWithRope, vec![8, 32, 128]);
    config.steps_list = vec![100, 300];
    config.repetitions = 3;
    config.device = DevicePerfModel::new(0.02, 256, 5e-5).unwrap();
    config.orchestration_overhead_s = 0.002;
    config.output_dir = out.clone();

    let results = run_sweep(&config, false).unwrap();
    println!("{} rows (expected {})", results.records.len(), expected_row_count(&config));

    // nothing left to do on a resume
    let again = run_sweep(&config, true).unwrap();
    println!("resume skipped {} rows, total still {}", again.skipped, again.records.len());

    let figures = emit_figures(&results, &out.join("figures")).unwrap();
    for f in &figures {
        println!("{}", f.display());
    }
}
