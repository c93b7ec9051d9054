//! Wall-clock sensitive checks. They share one lock so they never overlap
//! with each other inside this binary.

use std::hint::black_box;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use hetbench::executor::{available_cores, run_batch_cpu};
use hetbench::monitor::{sample_system_cpu, sample_system_cpu_over, MonitorError};
use hetbench::scheduler::run_hybrid;
use hetbench::simkernel::{build_model, step_in_place, DT};
use hetbench::{AllocationPlan, BatchRequest, CpuExecutor, DevicePerfModel, Executor, ModelKind, SyntheticExecutor, TimingMode};

static LOCK: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

#[test]
fn cpu_sampling_idle_and_spinning() {
    let _g = serial();
    let idle = match sample_system_cpu_over(Duration::from_millis(500)) {
        Ok(p) => p,
        Err(MonitorError::UnsupportedPlatform(why)) => {
            eprintln!("skipping: {why}");
            return;
        }
        Err(e) => panic!("{e}"),
    };
    assert!(idle < 20.0, "idle machine at {idle}%");

    let stop = AtomicBool::new(false);
    let busy = thread::scope(|s| {
        for _ in 0..available_cores() {
            s.spawn(|| {
                let mut x = 0u64;
                while !stop.load(Ordering::Relaxed) {
                    x = black_box(x.wrapping_mul(6364136223846793005).wrapping_add(1));
                }
            });
        }
        thread::sleep(Duration::from_millis(100));
        let p = sample_system_cpu_over(Duration::from_millis(500));
        stop.store(true, Ordering::Relaxed);
        p.unwrap()
    });
    assert!(busy > 80.0, "spinning machine at {busy}%");

    let (a, b) = (sample_system_cpu().unwrap(), sample_system_cpu().unwrap());
    assert!((0.0..=100.0).contains(&a) && (0.0..=100.0).contains(&b));
}

#[test]
fn cpu_executor_scales_with_workers() {
    let _g = serial();
    let request = BatchRequest::range(ModelKind::Box, 1024, 1000).unwrap();
    // best of three, so one descheduled run does not decide the outcome
    let timed = |w: usize| {
        (0..3)
            .map(|_| run_batch_cpu(&request, w).unwrap().wall_time)
            .fold(f64::INFINITY, f64::min)
    };
    let serial_time = timed(1);
    let cores = available_cores();
    let mut prev_speedup = 1.0;
    for w in 1..=cores.min(8) {
        let t = timed(w);
        assert!(t <= 2.0 * serial_time / w.min(cores) as f64, "{w} workers took {t} s, serial {serial_time} s");
        let speedup = serial_time / t;
        assert!(speedup >= 0.9 * prev_speedup, "speedup fell from {prev_speedup} to {speedup} at {w} workers");
        prev_speedup = speedup;
    }
    // more workers than cores still works, just without gain
    let t = timed(cores * 2);
    assert!(t <= 2.0 * serial_time);
}

#[test]
fn emulated_time_tracks_modeled_time() {
    let _g = serial();
    let device = DevicePerfModel::new(0.2, 1024, 1e-4).unwrap();
    let request = BatchRequest::range(ModelKind::Box, 2048, 100).unwrap();
    let modeled = SyntheticExecutor::new(device, TimingMode::Modeled).unwrap().run_batch(&request).unwrap();
    let emulated = SyntheticExecutor::new(device, TimingMode::Emulated).unwrap().run_batch(&request).unwrap();
    assert!((modeled.wall_time - 0.22).abs() < 1e-12);
    let rel = (emulated.wall_time - modeled.wall_time).abs() / modeled.wall_time;
    assert!(rel <= 0.10, "emulated {} vs modeled {}", emulated.wall_time, modeled.wall_time);
    assert_eq!(modeled.results, emulated.results);
}

#[test]
fn emulated_hybrid_is_max_plus_overhead() {
    let _g = serial();
    // one wave of 1000 steps at 1.5 ms plus 0.5 s startup is 2.0 s
    let device = DevicePerfModel::new(0.5, 4096, 1.5e-3).unwrap();
    let accel = SyntheticExecutor::new(device, TimingMode::Emulated).unwrap();
    let cpu = CpuExecutor::new(1).unwrap();
    let request = BatchRequest::range(ModelKind::Box, 128, 1000).unwrap();
    let plan = AllocationPlan::from_split(128, 64, 0.5);
    let out = run_hybrid(&plan, &request, &cpu, &accel, 0.1, TimingMode::Emulated).unwrap();
    assert!(out.t_cpu_part < 2.0);
    assert!(
        (2.1..=2.31).contains(&out.wall_combined),
        "combined {} (cpu {}, accel {})",
        out.wall_combined,
        out.t_cpu_part,
        out.t_accel_part
    );
}

#[test]
fn per_step_cost_follows_model_order() {
    let _g = serial();
    let median_step = |kind: ModelKind| {
        let mut s = build_model(kind, 3);
        let mut samples: Vec<f64> = (0..1000)
            .map(|_| {
                let t = Instant::now();
                step_in_place(&mut s, DT).unwrap();
                t.elapsed().as_secs_f64()
            })
            .collect();
        samples.sort_by(f64::total_cmp);
        samples[samples.len() / 2]
    };
    let medians: Vec<f64> = ModelKind::ALL.iter().map(|&k| median_step(k)).collect();
    assert!(medians.windows(2).all(|w| w[0] < w[1]), "{medians:?}");
}
