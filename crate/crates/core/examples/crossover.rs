//! Measures the CPU cost of one box-and-ball variant, derives a device whose
//! time crosses the CPU's between 4096 and 8192 variants, and sweeps across
//! the crossing with all three strategies.
//!
//! cargo run --release --example crossover

use hetbench::bench::{aggregate, run_sweep, Strategy, SweepConfig};
use hetbench::{BatchRequest, CpuExecutor, DevicePerfModel, Executor, ModelKind};

fn main() {
    let (kind, steps) = (ModelKind::BoxAndBall, 1000);
    let cpu = CpuExecutor::with_available_parallelism();
    let baseline = cpu.run_batch(&BatchRequest::range(kind, 8192, steps).unwrap()).unwrap();
    let per_variant = baseline.wall_time / 8192.0;
    println!("cpu: {:.1} us per variant with {} workers", per_variant * 1e6, cpu.workers());

    let mut config = SweepConfig::new(vec![kind]);
    config.variants_per_model.insert(kind, vec![1024, 4096, 8192, 32768]);
    config.steps_list = vec![steps];
    config.repetitions = 1;
    config.device = DevicePerfModel::crossing_cpu(per_variant, steps, 8192).unwrap();
    config.orchestration_overhead_s = 100.0 * per_variant;
    config.workers = cpu.workers();
    config.output_dir = std::env::temp_dir().join("hetbench-crossover-example");

    let results = run_sweep(&config, false).unwrap();
    println!("{:>7} {:>10} {:>10} {:>10}", "n", "cpu_s", "accel_s", "hybrid_s");
    let cells = aggregate(&results.records);
    for n in config.variants(kind) {
        let wall = |s: Strategy| cells.iter().find(|c| c.strategy == s && c.n_variants == n).map_or(f64::NAN, |c| c.wall.mean);
        println!(
            "{n:>7} {:>10.3} {:>10.3} {:>10.3}",
            wall(Strategy::CpuOnly),
            wall(Strategy::AccelOnly),
            wall(Strategy::Hybrid)
        );
    }
}
