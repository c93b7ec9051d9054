//! Batch execution back-ends.
//!
//! [`CpuExecutor`] really runs the kernel on a pool of worker threads.
//! [`SyntheticExecutor`] stands in for an accelerator: it computes the same
//! results through the kernel but reports time and utilization from a
//! [`DevicePerfModel`], and in emulated mode also blocks for that long.

use std::thread;
use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::monitor::Sampler;
use crate::simkernel::{self, ModelKind, SimError, VariantResult};

/// Cadence of the CPU utilization sampler during a batch.
pub const SAMPLE_PERIOD: Duration = Duration::from_millis(100);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecutorError {
    #[error("batch request has no seeds")]
    EmptyBatch,
    #[error("batch request needs at least one step")]
    ZeroSteps,
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("invalid device model: {0}")]
    InvalidDevice(String),
    #[error("variant {seed} failed: {source}")]
    VariantFailed {
        seed: u64,
        source: SimError,
        /// Variants that did complete, in input order.
        completed: Vec<VariantResult>,
    },
    #[error("{backend} back-end unavailable: {reason}")]
    DeviceFailure { backend: Backend, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Backend {
    Cpu,
    Accelerator,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Cpu => "cpu",
            Backend::Accelerator => "accelerator",
        })
    }
}

/// How a synthetic device reports time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TimingMode {
    /// Report the law's value without waiting.
    #[default]
    Modeled,
    /// Block for the law's value in real time.
    Emulated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchRequest {
    pub kind: ModelKind,
    pub seeds: Vec<u64>,
    pub steps: u32,
}

impl BatchRequest {
    pub fn new(kind: ModelKind, seeds: Vec<u64>, steps: u32) -> Result<Self, ExecutorError> {
        if seeds.is_empty() {
            return Err(ExecutorError::EmptyBatch);
        }
        if steps == 0 {
            return Err(ExecutorError::ZeroSteps);
        }
        Ok(BatchRequest { kind, seeds, steps })
    }

    /// Seeds `0..n`, the default variant indexing.
    pub fn range(kind: ModelKind, n: u64, steps: u32) -> Result<Self, ExecutorError> {
        Self::new(kind, (0..n).collect(), steps)
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    fn validate(&self) -> Result<(), ExecutorError> {
        if self.seeds.is_empty() {
            Err(ExecutorError::EmptyBatch)
        } else if self.steps == 0 {
            Err(ExecutorError::ZeroSteps)
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Seconds since the batch started.
    pub t: f64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    /// Same order as the request's seeds.
    pub results: Vec<VariantResult>,
    /// Seconds.
    pub wall_time: f64,
    pub utilization_trace: Vec<TracePoint>,
}

impl BatchResult {
    pub fn mean_utilization(&self) -> f64 {
        if self.utilization_trace.is_empty() {
            return 0.0;
        }
        self.utilization_trace.iter().map(|p| p.percent).sum::<f64>()
            / self.utilization_trace.len() as f64
    }
}

/// Parameters of the constant-then-linear accelerator timing law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DevicePerfModel {
    /// Fixed launch cost per batch, seconds.
    #[serde(rename = "startup_s")]
    pub startup: f64,
    /// Variants processed per wave at full parallelism.
    pub capacity: u64,
    /// Time for one wave to advance one step, seconds.
    #[serde(rename = "step_wave_cost_s")]
    pub step_wave_cost: f64,
    #[serde(default)]
    pub jitter_fraction: f64,
}

impl DevicePerfModel {
    pub fn new(startup: f64, capacity: u64, step_wave_cost: f64) -> Result<Self, ExecutorError> {
        let m = DevicePerfModel {
            startup,
            capacity,
            step_wave_cost,
            jitter_fraction: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_jitter(mut self, jitter_fraction: f64) -> Result<Self, ExecutorError> {
        self.jitter_fraction = jitter_fraction;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ExecutorError> {
        let bad = |msg: &str| Err(ExecutorError::InvalidDevice(msg.to_string()));
        if self.capacity < 1 {
            return bad("capacity must be >= 1");
        }
        if !self.startup.is_finite() || self.startup < 0.0 {
            return bad("startup_s must be finite and >= 0");
        }
        if !self.step_wave_cost.is_finite() || self.step_wave_cost <= 0.0 {
            return bad("step_wave_cost_s must be finite and > 0");
        }
        if !(0.0..1.0).contains(&self.jitter_fraction) {
            return bad("jitter_fraction must be in [0, 1)");
        }
        Ok(())
    }

    /// A device that loses to a CPU costing `cpu_variant_s` per variant for
    /// batches up to `capacity / 2` and beats it from `capacity` on.
    ///
    /// One wave costs `0.75 · capacity · cpu_variant_s` in total, split as
    /// startup `0.125` and per-wave work `0.625` of `capacity · cpu_variant_s`.
    pub fn crossing_cpu(cpu_variant_s: f64, steps: u32, capacity: u64) -> Result<Self, ExecutorError> {
        if steps == 0 {
            return Err(ExecutorError::ZeroSteps);
        }
        let unit = capacity as f64 * cpu_variant_s;
        DevicePerfModel::new(0.125 * unit, capacity, 0.625 * unit / steps as f64)
    }

    /// Number of full-parallelism waves needed for `n` variants.
    pub fn waves(&self, n: u64) -> u64 {
        n.div_ceil(self.capacity)
    }

    /// Noise-free time for `n` variants over `steps` steps, seconds. An empty
    /// batch never launches and costs nothing.
    pub fn modeled_time(&self, n: u64, steps: u32) -> f64 {
        if n == 0 {
            return 0.0;
        }
        self.startup + steps as f64 * self.step_wave_cost * self.waves(n) as f64
    }

    /// Device utilization while running `n` variants, percent.
    pub fn utilization(&self, n: u64) -> f64 {
        (100.0 * n as f64 / self.capacity as f64).min(100.0)
    }

    /// Multiplicative jitter in `[1, 1 + jitter_fraction)`, seeded by the batch identity.
    pub fn jitter_factor(&self, request: &BatchRequest) -> f64 {
        if self.jitter_fraction == 0.0 {
            return 1.0;
        }
        let key = request.seeds[0]
            ^ (request.seeds.len() as u64).rotate_left(32)
            ^ (request.steps as u64).rotate_left(48);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        1.0 + self.jitter_fraction * u
    }

    pub fn time_for(&self, request: &BatchRequest) -> f64 {
        self.modeled_time(request.len() as u64, request.steps) * self.jitter_factor(request)
    }

    /// Documentation preset loosely shaped after a mid-range consumer GPU.
    /// Absolute numbers are illustrative, not measurements.
    pub fn preset(name: &str) -> Option<DevicePerfModel> {
        match name {
            "gtx1070ti-like" => Some(DevicePerfModel {
                startup: 1.5,
                capacity: 8192,
                step_wave_cost: 4.0e-3,
                jitter_fraction: 0.0,
            }),
            "ideal" => Some(DevicePerfModel {
                startup: 0.0,
                capacity: u64::MAX,
                step_wave_cost: 1e-6,
                jitter_fraction: 0.0,
            }),
            _ => None,
        }
    }
}

impl Default for DevicePerfModel {
    fn default() -> Self {
        DevicePerfModel::preset("gtx1070ti-like").expect("built-in preset")
    }
}

/// A back-end that can execute a batch of variants.
pub trait Executor: Sync {
    fn backend(&self) -> Backend;
    fn run_batch(&self, request: &BatchRequest) -> Result<BatchResult, ExecutorError>;
}

/// Real multi-threaded CPU back-end with contiguous chunking.
#[derive(Debug, Clone, Copy)]
pub struct CpuExecutor {
    workers: usize,
}

impl CpuExecutor {
    pub fn new(workers: usize) -> Result<Self, ExecutorError> {
        if workers == 0 {
            return Err(ExecutorError::NoWorkers);
        }
        Ok(CpuExecutor { workers })
    }

    /// One worker per available hardware thread.
    pub fn with_available_parallelism() -> Self {
        CpuExecutor {
            workers: available_cores(),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }
}

pub fn available_cores() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

fn simulate_chunk(kind: ModelKind, seeds: &[u64], steps: u32) -> Vec<Result<VariantResult, SimError>> {
    seeds
        .iter()
        .map(|&seed| simkernel::simulate(kind, seed, steps))
        .collect()
}

fn collect_results(
    seeds: &[u64],
    outcomes: Vec<Result<VariantResult, SimError>>,
) -> Result<Vec<VariantResult>, ExecutorError> {
    let mut completed = Vec::with_capacity(outcomes.len());
    let mut first_failure = None;
    for (&seed, outcome) in seeds.iter().zip(outcomes) {
        match outcome {
            Ok(r) => completed.push(r),
            Err(e) => {
                first_failure.get_or_insert((seed, e));
            }
        }
    }
    match first_failure {
        None => Ok(completed),
        Some((seed, source)) => Err(ExecutorError::VariantFailed {
            seed,
            source,
            completed,
        }),
    }
}

impl Executor for CpuExecutor {
    fn backend(&self) -> Backend {
        Backend::Cpu
    }

    fn run_batch(&self, request: &BatchRequest) -> Result<BatchResult, ExecutorError> {
        request.validate()?;
        let sampler = Sampler::start(SAMPLE_PERIOD, 0.0);
        let start = Instant::now();

        let workers = self.workers.min(request.len());
        let chunk = request.len().div_ceil(workers);
        let outcomes: Vec<Result<VariantResult, SimError>> = if workers == 1 {
            simulate_chunk(request.kind, &request.seeds, request.steps)
        } else {
            thread::scope(|s| {
                let handles: Vec<_> = request
                    .seeds
                    .chunks(chunk)
                    .map(|seeds| s.spawn(move || simulate_chunk(request.kind, seeds, request.steps)))
                    .collect();
                handles
                    .into_iter()
                    .flat_map(|h| h.join().expect("simulation worker panicked"))
                    .collect()
            })
        };

        let wall_time = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
        let utilization_trace = sampler
            .finish()
            .into_iter()
            .map(|s| TracePoint {
                t: s.t,
                percent: s.cpu_percent,
            })
            .collect();
        Ok(BatchResult {
            results: collect_results(&request.seeds, outcomes)?,
            wall_time,
            utilization_trace,
        })
    }
}

/// Deliberate faults for exercising the harness's failure paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Run the last variant one step short.
    SkipStep,
    /// Refuse every batch.
    DeviceLost,
}

/// Accelerator stand-in obeying a [`DevicePerfModel`].
#[derive(Debug, Clone, Copy)]
pub struct SyntheticExecutor {
    pub model: DevicePerfModel,
    pub mode: TimingMode,
    fault: Option<Fault>,
}

impl SyntheticExecutor {
    pub fn new(model: DevicePerfModel, mode: TimingMode) -> Result<Self, ExecutorError> {
        model.validate()?;
        Ok(SyntheticExecutor {
            model,
            mode,
            fault: None,
        })
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.fault = Some(fault);
        self
    }
}

impl Executor for SyntheticExecutor {
    fn backend(&self) -> Backend {
        Backend::Accelerator
    }

    fn run_batch(&self, request: &BatchRequest) -> Result<BatchResult, ExecutorError> {
        request.validate()?;
        if self.fault == Some(Fault::DeviceLost) {
            return Err(ExecutorError::DeviceFailure {
                backend: Backend::Accelerator,
                reason: "injected device loss".into(),
            });
        }
        let start = Instant::now();
        let modeled = self.model.time_for(request);

        let mut outcomes = simulate_chunk(request.kind, &request.seeds, request.steps);
        if self.fault == Some(Fault::SkipStep) && request.steps > 1 {
            let last = request.seeds.len() - 1;
            outcomes[last] = simkernel::simulate(request.kind, request.seeds[last], request.steps - 1);
        }
        let results = collect_results(&request.seeds, outcomes)?;

        let wall_time = match self.mode {
            TimingMode::Modeled => modeled,
            TimingMode::Emulated => {
                let target = Duration::from_secs_f64(modeled);
                let spent = start.elapsed();
                if spent < target {
                    thread::sleep(target - spent);
                }
                start.elapsed().as_secs_f64()
            }
        }
        .max(f64::MIN_POSITIVE);
        let u = self.model.utilization(request.len() as u64);
        Ok(BatchResult {
            results,
            wall_time,
            utilization_trace: vec![
                TracePoint { t: 0.0, percent: u },
                TracePoint {
                    t: wall_time,
                    percent: u,
                },
            ],
        })
    }
}

/// CPU back-end over the given worker count.
pub fn run_batch_cpu(request: &BatchRequest, workers: usize) -> Result<BatchResult, ExecutorError> {
    CpuExecutor::new(workers)?.run_batch(request)
}

/// Synthetic accelerator back-end.
pub fn run_batch_synthetic(
    request: &BatchRequest,
    model: DevicePerfModel,
    mode: TimingMode,
) -> Result<BatchResult, ExecutorError> {
    SyntheticExecutor::new(model, mode)?.run_batch(request)
}

/// True iff both executors return element-wise identical checksums and seeds.
pub fn contract_check_with(
    cpu: &dyn Executor,
    accel: &dyn Executor,
    request: &BatchRequest,
) -> bool {
    let (Ok(a), Ok(b)) = (cpu.run_batch(request), accel.run_batch(request)) else {
        return false;
    };
    a.results.len() == request.len()
        && b.results.len() == request.len()
        && a.results
            .iter()
            .zip(&b.results)
            .zip(&request.seeds)
            .all(|((x, y), &s)| x.seed == s && y.seed == s && x.checksum == y.checksum)
}

/// Cross-backend correctness gate with default executors.
pub fn executor_contract_check(kind: ModelKind, seeds: &[u64], steps: u32) -> bool {
    let Ok(request) = BatchRequest::new(kind, seeds.to_vec(), steps) else {
        return false;
    };
    let accel = SyntheticExecutor::new(DevicePerfModel::default(), TimingMode::Modeled)
        .expect("default device model is valid");
    contract_check_with(&CpuExecutor::with_available_parallelism(), &accel, &request)
}
