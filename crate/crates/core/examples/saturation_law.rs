//! The synthetic accelerator's constant-then-linear timing law over the
//! published variant grid, and the knee recovered from it.
//!
//! cargo run --example saturation_law

use hetbench::bench::paper_variant_grid;
use hetbench::monitor::detect_saturation_knee;
use hetbench::{BatchRequest, DevicePerfModel, Executor, ModelKind, SyntheticExecutor, TimingMode};

fn main() {
    let device = DevicePerfModel::new(0.5, 1024, 1e-4).unwrap();
    let steps = 1000;
    let grid = paper_variant_grid(ModelKind::Box);

    println!("{:>8} {:>6} {:>10} {:>8}", "n", "waves", "time_s", "util_%");
    let mut series = Vec::new();
    for &n in &grid {
        let t = device.modeled_time(n, steps);
        println!("{n:>8} {:>6} {t:>10.4} {:>8.2}", device.waves(n), device.utilization(n));
        series.push((n, t));
    }
    let knee = detect_saturation_knee(&series).unwrap();
    println!("knee at n = {knee} (capacity {})", device.capacity);

    // the executor reports the same numbers without simulating anything slowly
    let exec = SyntheticExecutor::new(device, TimingMode::Modeled).unwrap();
    let out = exec.run_batch(&BatchRequest::range(ModelKind::Box, 2048, 100).unwrap()).unwrap();
    println!("2048 variants x 100 steps: wall {:.3} s, utilization {:.0}%", out.wall_time, out.mean_utilization());
}
