//! Repeats a small CPU batch and summarizes the wall times with a Student-t
//! confidence interval and an interpolated p95.
//!
//! cargo run --example statistics -- [repetitions]

use hetbench::monitor::summarize;
use hetbench::{BatchRequest, CpuExecutor, Executor, ModelKind};

fn main() {
    let reps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let cpu = CpuExecutor::with_available_parallelism();
    let request = BatchRequest::range(ModelKind::BoxAndBall, 64, 500).unwrap();

    let walls: Vec<f64> = (0..reps).map(|_| cpu.run_batch(&request).unwrap().wall_time).collect();
    let s = summarize(&walls).unwrap();
    println!("n      {}", s.n);
    println!("mean   {:.6} s", s.mean);
    println!("std    {:.6} s", s.std);
    println!("ci95   [{:.6}, {:.6}] s", s.ci95_low, s.ci95_high);
    println!("p95    {:.6} s{}", s.p95, if s.p95_is_rough() { "  (few samples)" } else { "" });

    let textbook = summarize(&[1.0, 2.0, 3.0]).unwrap();
    println!("[1,2,3] -> mean {} std {} ci95 [{:.3}, {:.3}]", textbook.mean, textbook.std, textbook.ci95_low, textbook.ci95_high);
}
