//! Utilization sampling, run statistics and saturation-knee detection.

use std::fs;
use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

/// Relative slack allowed over the flat-prefix minimum when locating the knee.
pub const KNEE_EPSILON: f64 = 0.05;

/// Below this many samples the p95 is an interpolation between very few order statistics.
pub const P95_MIN_RELIABLE_N: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonitorError {
    #[error("CPU accounting is not available on this platform: {0}")]
    UnsupportedPlatform(String),
    #[error("no samples to summarize")]
    EmptyInput,
    #[error("knee detection needs at least 3 points with strictly increasing n")]
    InvalidSeries,
    #[error("no saturation knee: series is {regime} (sentinel n = {sentinel})")]
    NoKnee { regime: Regime, sentinel: u64 },
}

/// Which single regime a knee-less series lies in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    AllFlat,
    AllLinear,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::AllFlat => "all-flat",
            Regime::AllLinear => "all-linear",
        })
    }
}

/// One point of a utilization trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilizationSample {
    /// Seconds since the start of the run.
    pub t: f64,
    pub cpu_percent: f64,
    pub accel_percent: f64,
}

/// Summary statistics of repeated timings, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub p95: f64,
}

impl Stats {
    /// True when `n` is too small for the p95 to mean much.
    pub fn p95_is_rough(&self) -> bool {
        self.n < P95_MIN_RELIABLE_N
    }
}

/// Two-sided 95% Student-t critical value for `dof` degrees of freedom.
pub fn t_critical_95(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("dof >= 1")
        .inverse_cdf(0.975)
}

/// Percentile by linear interpolation between order statistics of a sorted slice.
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean, sample std, Student-t 95% CI and interpolated p95.
pub fn summarize(samples: &[f64]) -> Result<Stats, MonitorError> {
    if samples.is_empty() {
        return Err(MonitorError::EmptyInput);
    }
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    // summing in sorted order keeps the result independent of input order
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let (std, half_width) = if n == 1 {
        (0.0, 0.0)
    } else {
        let var = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        (std, t_critical_95(n - 1) * std / (n as f64).sqrt())
    };
    Ok(Stats {
        n,
        mean,
        std,
        ci95_low: mean - half_width,
        ci95_high: mean + half_width,
        p95: percentile_sorted(&sorted, 0.95),
    })
}

/// Largest batch size still inside the flat prefix of a (n, wall) series.
///
/// The prefix extends while each wall time stays within `1 + KNEE_EPSILON` of
/// the smallest wall time seen so far.
pub fn detect_saturation_knee(points: &[(u64, f64)]) -> Result<u64, MonitorError> {
    if points.len() < 3 || points.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(MonitorError::InvalidSeries);
    }
    let mut floor = points[0].1;
    let mut last_flat = 0;
    for (i, &(_, t)) in points.iter().enumerate().skip(1) {
        if t > (1.0 + KNEE_EPSILON) * floor {
            break;
        }
        floor = floor.min(t);
        last_flat = i;
    }
    if last_flat == points.len() - 1 {
        Err(MonitorError::NoKnee {
            regime: Regime::AllFlat,
            sentinel: points[last_flat].0,
        })
    } else if last_flat == 0 {
        Err(MonitorError::NoKnee {
            regime: Regime::AllLinear,
            sentinel: points[0].0,
        })
    } else {
        Ok(points[last_flat].0)
    }
}

/// Knee estimate that folds the one-regime sentinels back into a value.
pub fn knee_or_sentinel(points: &[(u64, f64)]) -> Result<u64, MonitorError> {
    match detect_saturation_knee(points) {
        Ok(n) | Err(MonitorError::NoKnee { sentinel: n, .. }) => Ok(n),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy)]
struct CpuTimes {
    busy: u64,
    total: u64,
}

fn read_cpu_times() -> Result<CpuTimes, MonitorError> {
    let stat = fs::read_to_string("/proc/stat")
        .map_err(|e| MonitorError::UnsupportedPlatform(format!("/proc/stat: {e}")))?;
    let line = stat
        .lines()
        .find(|l| l.starts_with("cpu "))
        .ok_or_else(|| MonitorError::UnsupportedPlatform("no aggregate cpu line".into()))?;
    let fields: Vec<u64> = line
        .split_whitespace()
        .skip(1)
        .map(|f| f.parse().unwrap_or(0))
        .collect();
    if fields.len() < 4 {
        return Err(MonitorError::UnsupportedPlatform("short cpu line".into()));
    }
    // user nice system idle iowait irq softirq steal [guest guest_nice]; guests are already in user
    let total: u64 = fields.iter().take(8).sum();
    let idle = fields[3] + fields.get(4).copied().unwrap_or(0);
    Ok(CpuTimes {
        busy: total - idle,
        total,
    })
}

fn busy_percent(a: CpuTimes, b: CpuTimes) -> Option<f64> {
    let total = b.total.checked_sub(a.total)?;
    if total == 0 {
        return None;
    }
    let busy = b.busy.saturating_sub(a.busy);
    Some((100.0 * busy as f64 / total as f64).clamp(0.0, 100.0))
}

/// Whole-system CPU utilization over a short window, percent.
pub fn sample_system_cpu() -> Result<f64, MonitorError> {
    sample_system_cpu_over(Duration::from_millis(100))
}

pub fn sample_system_cpu_over(window: Duration) -> Result<f64, MonitorError> {
    let a = read_cpu_times()?;
    let deadline = Instant::now() + window;
    loop {
        thread::sleep(Duration::from_millis(10));
        let b = read_cpu_times()?;
        if let Some(p) = busy_percent(a, b) {
            if Instant::now() >= deadline {
                return Ok(p);
            }
        }
    }
}

/// Background CPU sampler running at a fixed cadence until stopped.
#[derive(Debug)]
pub struct Sampler {
    stop: mpsc::Sender<()>,
    handle: JoinHandle<Vec<UtilizationSample>>,
}

impl Sampler {
    /// Starts sampling every `period`. On platforms without CPU accounting the
    /// sampler still runs but yields an empty trace.
    pub fn start(period: Duration, accel_percent: f64) -> Sampler {
        let (stop, rx) = mpsc::channel::<()>();
        let handle = thread::spawn(move || {
            let origin = Instant::now();
            let mut trace = Vec::new();
            let Ok(mut prev) = read_cpu_times() else {
                let _ = rx.recv();
                return trace;
            };
            loop {
                let done = !matches!(rx.recv_timeout(period), Err(RecvTimeoutError::Timeout));
                if let Ok(now) = read_cpu_times() {
                    if let Some(p) = busy_percent(prev, now) {
                        trace.push(UtilizationSample {
                            t: origin.elapsed().as_secs_f64(),
                            cpu_percent: p,
                            accel_percent,
                        });
                    }
                    prev = now;
                }
                if done {
                    return trace;
                }
            }
        });
        Sampler { stop, handle }
    }

    pub fn finish(self) -> Vec<UtilizationSample> {
        let _ = self.stop.send(());
        self.handle.join().unwrap_or_default()
    }
}
