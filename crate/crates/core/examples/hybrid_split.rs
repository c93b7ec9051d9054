//! Calibrates both back-ends on a probe batch, splits a larger batch by the
//! reversed time ratio, compares the split against an exhaustive search and
//! runs it.
//!
//! cargo run --example hybrid_split

use hetbench::scheduler::{calibrate, naive_sum, plan_allocation, plan_allocation_optimal, run_hybrid};
use hetbench::{BatchRequest, CpuExecutor, DevicePerfModel, ModelKind, SyntheticExecutor, TimingMode};

fn main() {
    let (kind, steps, n) = (ModelKind::BoxAndBall, 200, 2000);
    let cpu = CpuExecutor::with_available_parallelism();

    // measure roughly what one variant costs here, then build a device that
    // is competitive at this batch size
    let probe = calibrate(kind, steps, 256, &cpu, &SyntheticExecutor::new(DevicePerfModel::default(), TimingMode::Modeled).unwrap()).unwrap();
    let per_variant = probe.t_cpu / 256.0;
    let device = DevicePerfModel::new(100.0 * per_variant, 512, 300.0 * per_variant / steps as f64).unwrap();
    let accel = SyntheticExecutor::new(device, TimingMode::Modeled).unwrap();

    let profile = calibrate(kind, steps, n, &cpu, &accel).unwrap();
    println!("calibration: t_cpu {:.4} s, t_accel {:.4} s", profile.t_cpu, profile.t_accel);

    let plan = plan_allocation(&profile, n).unwrap();
    println!("reverse ratio: cpu={} accel={} (target fraction {:.4})", plan.n_cpu, plan.n_accel, plan.target_fraction);

    let best = plan_allocation_optimal(|k| k as f64 * per_variant, |k| device.modeled_time(k, steps), n).unwrap();
    println!("exhaustive:    cpu={} accel={}", best.n_cpu, best.n_accel);

    let request = BatchRequest::range(kind, n, steps).unwrap();
    let out = run_hybrid(&plan, &request, &cpu, &accel, 0.01, TimingMode::Modeled).unwrap();
    println!("cpu share     {:.4} s", out.t_cpu_part);
    println!("accel share   {:.4} s", out.t_accel_part);
    println!("combined      {:.4} s", out.wall_combined);
    println!("naive sum     {:.4} s", naive_sum(profile.t_cpu, profile.t_accel));
    println!("best single   {:.4} s", profile.t_cpu.min(profile.t_accel));
}
