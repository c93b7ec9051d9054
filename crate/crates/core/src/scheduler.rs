//! Calibrate-then-split hybrid scheduling across a CPU and an accelerator.
//!
//! 1. [`calibrate`] runs the same probe batch sequentially on each back-end.
//! 2. [`plan_allocation`] splits a batch by the reversed time ratio, giving each
//!    back-end a share inversely proportional to its probe time.
//! 3. [`run_hybrid`] dispatches both shares concurrently and merges the results.
//!
//! [`plan_allocation_optimal`] is the brute-force reference the heuristic is
//! judged against.

use std::thread;
use std::time::{Duration, Instant};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{Backend, BatchRequest, BatchResult, Executor, ExecutorError, TimingMode};
use crate::simkernel::{ModelKind, VariantResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedulerError {
    #[error("probe size must be at least 1")]
    EmptyProbe,
    #[error("cannot plan an empty batch")]
    EmptyBatch,
    #[error("plan covers {plan} variants but the request has {request}")]
    PlanMismatch { plan: u64, request: u64 },
    #[error("both back-ends failed (cpu: {cpu}; accelerator: {accel})")]
    BothFailed {
        cpu: Box<ExecutorError>,
        accel: Box<ExecutorError>,
    },
    #[error(transparent)]
    Executor(#[from] ExecutorError),
}

/// Measured probe times for one (model, steps) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    pub kind: ModelKind,
    pub steps: u32,
    pub probe_n: u64,
    /// Seconds; infinite when the CPU failed.
    pub t_cpu: f64,
    /// Seconds; infinite when the accelerator failed.
    pub t_accel: f64,
    pub ratio_accel_over_cpu: f64,
    /// Back-end that failed during calibration, if any.
    pub failed: Option<Backend>,
}

impl CalibrationProfile {
    /// Profile from known times, e.g. stubbed or previously recorded.
    pub fn from_times(kind: ModelKind, steps: u32, probe_n: u64, t_cpu: f64, t_accel: f64) -> Self {
        CalibrationProfile {
            kind,
            steps,
            probe_n,
            t_cpu,
            t_accel,
            ratio_accel_over_cpu: t_accel / t_cpu,
            failed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub n_total: u64,
    pub n_cpu: u64,
    pub n_accel: u64,
    /// `n_accel / n_total`.
    pub accel_fraction: f64,
    /// Unrounded share the plan aimed for, `t_cpu / (t_cpu + t_accel)`.
    pub target_fraction: f64,
}

impl AllocationPlan {
    pub fn from_split(n_total: u64, n_accel: u64, target_fraction: f64) -> Self {
        assert!(n_accel <= n_total && n_total > 0);
        AllocationPlan {
            n_total,
            n_cpu: n_total - n_accel,
            n_accel,
            accel_fraction: n_accel as f64 / n_total as f64,
            target_fraction,
        }
    }

    pub fn all_cpu(n_total: u64) -> Self {
        Self::from_split(n_total, 0, 0.0)
    }

    pub fn all_accel(n_total: u64) -> Self {
        Self::from_split(n_total, n_total, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridResult {
    /// Seconds, including orchestration overhead.
    pub wall_combined: f64,
    pub t_cpu_part: f64,
    pub t_accel_part: f64,
    pub overhead: f64,
    pub plan: AllocationPlan,
    pub cpu_batch: Option<BatchResult>,
    pub accel_batch: Option<BatchResult>,
    /// All variants in the original seed order.
    pub results: Vec<VariantResult>,
    /// One back-end failed and its share was re-run on the other.
    pub degraded: bool,
}

/// Runs `probe_n` variants on the CPU, then on the accelerator, and records both times.
pub fn calibrate(
    kind: ModelKind,
    steps: u32,
    probe_n: u64,
    cpu: &dyn Executor,
    accel: &dyn Executor,
) -> Result<CalibrationProfile, SchedulerError> {
    if probe_n == 0 {
        return Err(SchedulerError::EmptyProbe);
    }
    let probe = BatchRequest::range(kind, probe_n, steps)?;
    let cpu_out = cpu.run_batch(&probe);
    let accel_out = accel.run_batch(&probe);
    let (t_cpu, t_accel, failed) = match (cpu_out, accel_out) {
        (Ok(c), Ok(a)) => (c.wall_time, a.wall_time, None),
        (Err(e), Ok(a)) => {
            warn!("cpu calibration failed, routing everything to the accelerator: {e}");
            (f64::INFINITY, a.wall_time, Some(Backend::Cpu))
        }
        (Ok(c), Err(e)) => {
            warn!("accelerator calibration failed, routing everything to the cpu: {e}");
            (c.wall_time, f64::INFINITY, Some(Backend::Accelerator))
        }
        (Err(c), Err(a)) => {
            return Err(SchedulerError::BothFailed {
                cpu: Box::new(c),
                accel: Box::new(a),
            })
        }
    };
    Ok(CalibrationProfile {
        kind,
        steps,
        probe_n,
        t_cpu,
        t_accel,
        ratio_accel_over_cpu: t_accel / t_cpu,
        failed,
    })
}

/// Reverse-ratio split with the default floor threshold `1 / (2 n_total)`.
pub fn plan_allocation(profile: &CalibrationProfile, n_total: u64) -> Result<AllocationPlan, SchedulerError> {
    plan_allocation_with_floor(profile, n_total, None)
}

/// Reverse-ratio split. A share that rounds to zero while its exact fraction
/// is at least `floor` (default `1 / (2 n_total)`) is bumped to one variant.
pub fn plan_allocation_with_floor(
    profile: &CalibrationProfile,
    n_total: u64,
    floor: Option<f64>,
) -> Result<AllocationPlan, SchedulerError> {
    if n_total == 0 {
        return Err(SchedulerError::EmptyBatch);
    }
    match profile.failed {
        Some(Backend::Cpu) => return Ok(AllocationPlan::all_accel(n_total)),
        Some(Backend::Accelerator) => return Ok(AllocationPlan::all_cpu(n_total)),
        None => {}
    }
    let fraction = profile.t_cpu / (profile.t_cpu + profile.t_accel);
    let mut n_accel = ((fraction * n_total as f64).round() as u64).min(n_total);
    let floor = floor.unwrap_or(1.0 / (2.0 * n_total as f64));
    if n_total >= 2 {
        if n_accel == 0 && fraction >= floor {
            n_accel = 1;
        } else if n_accel == n_total && 1.0 - fraction >= floor {
            n_accel = n_total - 1;
        }
    }
    Ok(AllocationPlan::from_split(n_total, n_accel, fraction))
}

/// Exhaustive search for the split minimizing the slower side's time.
/// Ties go to the smaller accelerator share.
pub fn plan_allocation_optimal<C, A>(cpu_time: C, accel_time: A, n_total: u64) -> Result<AllocationPlan, SchedulerError>
where
    C: Fn(u64) -> f64,
    A: Fn(u64) -> f64,
{
    if n_total == 0 {
        return Err(SchedulerError::EmptyBatch);
    }
    let mut best = (f64::INFINITY, 0);
    for n_accel in 0..=n_total {
        let makespan = cpu_time(n_total - n_accel).max(accel_time(n_accel));
        if makespan < best.0 {
            best = (makespan, n_accel);
        }
    }
    let n_accel = best.1;
    Ok(AllocationPlan::from_split(n_total, n_accel, n_accel as f64 / n_total as f64))
}

/// Sequential CPU time plus sequential accelerator time.
pub fn naive_sum(t_cpu_seq: f64, t_accel_seq: f64) -> f64 {
    assert!(t_cpu_seq >= 0.0 && t_accel_seq >= 0.0, "times must be non-negative");
    t_cpu_seq + t_accel_seq
}

type Part = Option<Result<BatchResult, ExecutorError>>;

fn run_part(exec: &dyn Executor, kind: ModelKind, seeds: &[u64], steps: u32) -> Part {
    if seeds.is_empty() {
        return None;
    }
    Some(BatchRequest::new(kind, seeds.to_vec(), steps).and_then(|r| exec.run_batch(&r)))
}

/// Executes `plan` over `request`: the first `n_cpu` seeds go to the CPU and
/// the rest to the accelerator.
///
/// In [`TimingMode::Emulated`] both shares run on separate threads and the
/// combined wall clock is measured around them, with the overhead realized as
/// a blocking delay. In [`TimingMode::Modeled`] the accelerator share is
/// computed first so it cannot steal cycles from the measured CPU share, and
/// the combined time is `max(cpu, accel) + overhead`.
///
/// If one back-end fails, its share is re-run on the other and the result is
/// marked degraded.
pub fn run_hybrid(
    plan: &AllocationPlan,
    request: &BatchRequest,
    cpu: &dyn Executor,
    accel: &dyn Executor,
    orchestration_overhead: f64,
    mode: TimingMode,
) -> Result<HybridResult, SchedulerError> {
    if plan.n_total != request.len() as u64 {
        return Err(SchedulerError::PlanMismatch {
            plan: plan.n_total,
            request: request.len() as u64,
        });
    }
    let overhead = orchestration_overhead.max(0.0);
    let (cpu_seeds, accel_seeds) = request.seeds.split_at(plan.n_cpu as usize);
    let (kind, steps) = (request.kind, request.steps);

    let start = Instant::now();
    let (cpu_part, accel_part): (Part, Part) = match mode {
        TimingMode::Emulated => thread::scope(|s| {
            let a = s.spawn(|| run_part(accel, kind, accel_seeds, steps));
            let c = run_part(cpu, kind, cpu_seeds, steps);
            (c, a.join().expect("accelerator dispatch panicked"))
        }),
        TimingMode::Modeled => {
            let a = run_part(accel, kind, accel_seeds, steps);
            let c = run_part(cpu, kind, cpu_seeds, steps);
            (c, a)
        }
    };

    let mut degraded = false;
    let (cpu_batch, accel_batch) = match (cpu_part, accel_part) {
        (Some(Err(c)), Some(Err(a))) => {
            return Err(SchedulerError::BothFailed {
                cpu: Box::new(c),
                accel: Box::new(a),
            })
        }
        (Some(Err(e)), accel_part) => {
            warn!("cpu share failed, re-dispatching to the accelerator: {e}");
            degraded = true;
            let redo = accel.run_batch(&BatchRequest::new(kind, cpu_seeds.to_vec(), steps)?)?;
            let merged = match accel_part {
                Some(Ok(a)) => chain_batches(a, redo, true),
                _ => redo,
            };
            (None, Some(merged))
        }
        (cpu_part, Some(Err(e))) => {
            warn!("accelerator share failed, re-dispatching to the cpu: {e}");
            degraded = true;
            let redo = cpu.run_batch(&BatchRequest::new(kind, accel_seeds.to_vec(), steps)?)?;
            let merged = match cpu_part {
                Some(Ok(c)) => chain_batches(c, redo, false),
                _ => redo,
            };
            (Some(merged), None)
        }
        (c, a) => (c.map(Result::unwrap), a.map(Result::unwrap)),
    };

    let t_cpu_part = cpu_batch.as_ref().map_or(0.0, |b| b.wall_time);
    let t_accel_part = accel_batch.as_ref().map_or(0.0, |b| b.wall_time);
    let wall_combined = match mode {
        TimingMode::Modeled => t_cpu_part.max(t_accel_part) + overhead,
        TimingMode::Emulated => {
            thread::sleep(Duration::from_secs_f64(overhead));
            start.elapsed().as_secs_f64()
        }
    };

    let results: Vec<VariantResult> = cpu_batch
        .iter()
        .chain(accel_batch.iter())
        .flat_map(|b| b.results.iter().copied())
        .collect();
    debug_assert_eq!(results.len(), request.len());

    Ok(HybridResult {
        wall_combined,
        t_cpu_part,
        t_accel_part,
        overhead,
        plan: *plan,
        cpu_batch,
        accel_batch,
        results,
        degraded,
    })
}

/// Joins two batches that ran back to back on one device. Times add up and the
/// later trace is shifted; `later_first` puts the later batch's results in front.
fn chain_batches(earlier: BatchResult, later: BatchResult, later_first: bool) -> BatchResult {
    let offset = earlier.wall_time;
    let results = if later_first {
        later.results.into_iter().chain(earlier.results).collect()
    } else {
        earlier.results.into_iter().chain(later.results).collect()
    };
    let mut utilization_trace = earlier.utilization_trace;
    utilization_trace.extend(later.utilization_trace.into_iter().map(|mut p| {
        p.t += offset;
        p
    }));
    BatchResult {
        results,
        wall_time: earlier.wall_time + later.wall_time,
        utilization_trace,
    }
}
