//! Benchmarking harness and hybrid scheduler for batches of independent
//! physics-simulation variants running on a CPU and an accelerator.
//!
//! The modules build on each other bottom-up:
//!
//! - [`simkernel`]: deterministic particle/constraint simulation, four model classes.
//! - [`executor`]: batch back-ends, a threaded CPU one and a synthetic accelerator
//!   following a constant-then-linear timing law.
//! - [`monitor`]: utilization sampling, summary statistics, saturation-knee detection.
//! - [`scheduler`]: calibrate both back-ends, split by the reversed time ratio,
//!   run both concurrently.
//! - [`bench`]: sweep grids, CSV/JSON-lines persistence, SVG figures.
//! - [`evoloop`]: a small (μ+λ) loop with a per-phase profiler.
//! - [`cli`]: the `hetbench` command line.

pub mod bench;
pub mod cli;
pub mod evoloop;
pub mod executor;
pub mod monitor;
pub mod scheduler;
pub mod simkernel;

pub use executor::{
    BatchRequest, BatchResult, CpuExecutor, DevicePerfModel, Executor, SyntheticExecutor, TimingMode,
};
pub use scheduler::{AllocationPlan, CalibrationProfile, HybridResult};
pub use simkernel::{ModelKind, VariantResult, WorldState};
