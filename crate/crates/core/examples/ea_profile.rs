//! A (mu+lambda) loop over simulation seeds with a per-phase time table.
//! Evaluation should dominate.
//!
//! cargo run --example ea_profile -- [pop] [gens] [steps]

use hetbench::evoloop::{report_profile, run_ea};
use hetbench::{CpuExecutor, ModelKind};

fn main() {
    let arg = |i: usize, d: u64| std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let (pop, gens, steps) = (arg(1, 32) as usize, arg(2, 5) as u32, arg(3, 1000) as u32);

    let cpu = CpuExecutor::with_available_parallelism();
    let (population, profile) = run_ea(ModelKind::Box, pop, gens, steps, &cpu, 0).unwrap();
    print!("{}", report_profile(&profile));
    println!("generation {} best fitness {:.4} m", population.generation, population.best_fitness());
}
