//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.
//!
//! cargo test --test acceptance

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use hetbench::bench::{
    aggregate, emit_figures, paper_variant_grid, read_records_csv, run_sweep, write_records, CellStats, RecordFormat,
    RunRecord, RunStatus, Strategy, SweepConfig, SweepResults, CSV_HEADER,
};
use hetbench::cli;
use hetbench::executor::contract_check_with;
use hetbench::monitor::{detect_saturation_knee, summarize};
use hetbench::scheduler::{calibrate, naive_sum, plan_allocation, plan_allocation_optimal, run_hybrid, AllocationPlan, CalibrationProfile};
use hetbench::{BatchRequest, CpuExecutor, DevicePerfModel, Executor, ModelKind, SyntheticExecutor, TimingMode};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
}

fn cpu() -> CpuExecutor {
    CpuExecutor::with_available_parallelism()
}

fn modeled(device: DevicePerfModel) -> SyntheticExecutor {
    SyntheticExecutor::new(device, TimingMode::Modeled).unwrap()
}

// 200 random (model, seed) pairs, each at 10, 100 and 1000 steps.
fn ac1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut by_kind: BTreeMap<ModelKind, Vec<u64>> = BTreeMap::new();
    for _ in 0..200 {
        let kind = ModelKind::ALL[(rng.next_u64() % 4) as usize];
        by_kind.entry(kind).or_default().push(rng.next_u64());
    }
    let accel = modeled(DevicePerfModel::default());
    let cpu = cpu();
    for steps in [10, 100, 1000] {
        for (&kind, seeds) in &by_kind {
            let request = BatchRequest::new(kind, seeds.clone(), steps).unwrap();
            check(contract_check_with(&cpu, &accel, &request), format!("{kind} at {steps} steps differs"))?;
        }
    }
    Ok("600 checksums identical across executors (exact)".into())
}

fn ac2() -> Outcome {
    let (startup, capacity, cost, steps) = (0.5, 1024u64, 1e-4, 1000u32);
    let device = DevicePerfModel::new(startup, capacity, cost).unwrap();
    let grid = paper_variant_grid(ModelKind::Box);
    let exec = modeled(device);
    let flat = startup + steps as f64 * cost;
    let mut series = Vec::new();
    for &n in &grid {
        let t = device.modeled_time(n, steps);
        if n <= capacity {
            check(t == flat, format!("n={n}: {t} != {flat}"))?;
        } else {
            let law = startup + n.div_ceil(capacity) as f64 * steps as f64 * cost;
            check(t == law, format!("n={n}: {t} != {law}"))?;
        }
        // the executor reports the same number for batches small enough to simulate quickly
        if n <= 2056 {
            let out = exec.run_batch(&BatchRequest::range(ModelKind::Box, n, steps).unwrap()).unwrap();
            check(out.wall_time == t, format!("executor n={n}: {} != {t}", out.wall_time))?;
        }
        series.push((n, t));
    }
    let knee = detect_saturation_knee(&series).map_err(|e| e.to_string())?;
    let (ki, ci) = (
        grid.iter().position(|&n| n == knee).unwrap(),
        grid.iter().position(|&n| n == capacity).unwrap(),
    );
    check(ki.abs_diff(ci) <= 1, format!("knee {knee} vs capacity {capacity}"))?;
    Ok(format!("{} grid points exact, knee = {knee} (C = {capacity}, within one grid point)", grid.len()))
}

fn ac3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let t_cpu = uniform(&mut rng, 1e-3, 1e3);
        let t_accel = uniform(&mut rng, 1e-3, 1e3);
        let n = 1 + rng.next_u64() % 100_000;
        let plan = plan_allocation(&CalibrationProfile::from_times(ModelKind::Box, 1, n, t_cpu, t_accel), n).unwrap();
        let expected = t_cpu / (t_cpu + t_accel);
        check(plan.target_fraction == expected, format!("fraction {} != {expected}", plan.target_fraction))?;
        check(plan.n_cpu + plan.n_accel == n, "shares do not add up")?;
    }
    for n in [2u64, 3, 99, 100, 1001] {
        let t = uniform(&mut rng, 0.1, 10.0);
        let plan = plan_allocation(&CalibrationProfile::from_times(ModelKind::Box, 1, n, t, t), n).unwrap();
        check(plan.n_cpu.abs_diff(plan.n_accel) <= 1, format!("n={n}: {} vs {}", plan.n_cpu, plan.n_accel))?;
    }
    Ok("1000 profiles exact; equal speeds split 50/50 within 1 variant".into())
}

fn ac4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0;
    for _ in 0..100 {
        let a = uniform(&mut rng, 1e-6, 1e-2);
        let b = uniform(&mut rng, 1e-6, 1e-2);
        for n in [10u64, 100, 1000] {
            let profile = CalibrationProfile::from_times(ModelKind::Box, 1, n, a * n as f64, b * n as f64);
            let h = plan_allocation(&profile, n).unwrap();
            let o = plan_allocation_optimal(|k| a * k as f64, |k| b * k as f64, n).unwrap();
            worst = worst.max(h.n_accel.abs_diff(o.n_accel));
        }
    }
    check(worst <= 1, format!("largest gap {worst} variants"))?;
    Ok(format!("300 cases, largest heuristic/oracle gap {worst} variant(s) (tolerance 1)"))
}

fn ac5() -> Outcome {
    let (kind, n, steps, overhead) = (ModelKind::Box, 128u64, 100u32, 0.2);
    let device = DevicePerfModel::new(0.5, 8192, 1e-4).unwrap();
    let accel = SyntheticExecutor::new(device, TimingMode::Emulated).unwrap();
    let cpu = cpu();
    let request = BatchRequest::range(kind, n, steps).unwrap();

    let t_cpu_seq = cpu.run_batch(&request).unwrap().wall_time;
    let t_accel_seq = accel.run_batch(&request).unwrap().wall_time;
    let naive = naive_sum(t_cpu_seq, t_accel_seq);
    let profile = calibrate(kind, steps, n, &cpu, &accel).unwrap();
    let heuristic = plan_allocation(&profile, n).unwrap();
    let mut notes = Vec::new();
    for (label, plan) in [("heuristic", heuristic), ("even", AllocationPlan::from_split(n, n / 2, 0.5))] {
        let out = run_hybrid(&plan, &request, &cpu, &accel, overhead, TimingMode::Emulated).unwrap();
        let accel_share = if plan.n_accel > 0 { device.modeled_time(plan.n_accel, steps) } else { 0.0 };
        let cpu_share = t_cpu_seq * plan.n_cpu as f64 / n as f64;
        let predicted = accel_share.max(cpu_share) + overhead;
        check(
            (out.wall_combined - predicted).abs() <= 0.10 * predicted,
            format!("{label}: combined {:.4} vs predicted {predicted:.4}", out.wall_combined),
        )?;
        check(out.wall_combined > t_cpu_seq, format!("{label}: combined {:.4} <= cpu-only {t_cpu_seq:.4}", out.wall_combined))?;
        check(
            out.wall_combined > t_cpu_seq.min(t_accel_seq),
            format!("{label}: combined beat the best single back-end"),
        )?;
        // direction against the naive sum follows from the prediction
        if predicted > 1.1 * naive {
            check(out.wall_combined > naive, format!("{label}: expected combined > naive {naive:.4}"))?;
        } else if predicted < 0.9 * naive {
            check(out.wall_combined < naive, format!("{label}: expected combined < naive {naive:.4}"))?;
        }
        notes.push(format!(
            "{label} split {}/{}: combined {:.3}s vs cpu-only {t_cpu_seq:.3}s, naive {naive:.3}s",
            plan.n_cpu, plan.n_accel, out.wall_combined
        ));
    }
    Ok(notes.join("; "))
}

struct Crossover {
    cells: Vec<CellStats>,
    grid: Vec<u64>,
    per_variant: f64,
    figure_csv: String,
}

fn crossover_sweep(dir: &Path) -> Crossover {
    let (kind, steps, capacity) = (ModelKind::BoxAndBall, 1000u32, 8192u64);
    let cpu = cpu();
    // baseline on the host, same worker count as the sweep
    let baseline = cpu.run_batch(&BatchRequest::range(kind, capacity, steps).unwrap()).unwrap();
    let per_variant = baseline.wall_time / capacity as f64;

    let mut config = SweepConfig::new(vec![kind]);
    config.max_variants_cap.insert(kind, 32768);
    config.steps_list = vec![steps];
    config.device = DevicePerfModel::crossing_cpu(per_variant, steps, capacity).unwrap();
    config.orchestration_overhead_s = 100.0 * per_variant;
    config.workers = cpu.workers();
    config.output_dir = dir.to_path_buf();
    let results = run_sweep(&config, false).unwrap();
    let figures = emit_figures(&results, &dir.join("figures")).unwrap();
    let sidecar = figures
        .iter()
        .find(|p| p.to_string_lossy().ends_with("box_and_ball_1000_wall_vs_variants.csv"))
        .expect("figure (a) sidecar");
    Crossover {
        cells: aggregate(&results.records),
        grid: config.variants(kind),
        per_variant,
        figure_csv: std::fs::read_to_string(sidecar).unwrap(),
    }
}

fn mean_wall(cells: &[CellStats], s: Strategy, n: u64) -> f64 {
    cells
        .iter()
        .find(|c| c.strategy == s && c.n_variants == n)
        .map_or(f64::NAN, |c| c.wall.mean)
}

fn ac6(x: &Crossover) -> Outcome {
    for &n in &x.grid {
        let (c, a) = (mean_wall(&x.cells, Strategy::CpuOnly, n), mean_wall(&x.cells, Strategy::AccelOnly, n));
        if n >= 8192 {
            check(a < c, format!("n={n}: accel {a:.3}s not below cpu {c:.3}s"))?;
        } else if n <= 4096 {
            check(c < a, format!("n={n}: cpu {c:.3}s not below accel {a:.3}s"))?;
        }
    }
    // the figure's sidecar carries the same means
    let mut from_figure: BTreeMap<(String, u64), f64> = BTreeMap::new();
    for line in x.figure_csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        from_figure.insert((f[1].to_string(), f[2].parse().unwrap()), f[5].parse().unwrap());
    }
    for &n in &x.grid {
        let c = from_figure[&("CpuOnly".to_string(), n)];
        let a = from_figure[&("AccelOnly".to_string(), n)];
        check((n >= 8192) == (a < c), format!("figure disagrees at n={n}"))?;
    }
    Ok(format!(
        "crossover between 4096 and 8192 over {} grid points (cpu {:.1} us/variant at 1000 steps)",
        x.grid.len(),
        x.per_variant * 1e6
    ))
}

fn ac7(x: &Crossover) -> Outcome {
    let largest = *x.grid.last().unwrap();
    let h = mean_wall(&x.cells, Strategy::Hybrid, largest);
    let best = mean_wall(&x.cells, Strategy::CpuOnly, largest).min(mean_wall(&x.cells, Strategy::AccelOnly, largest));
    check(h < 0.95 * best, format!("n={largest}: hybrid {h:.3}s vs best single {best:.3}s"))?;

    let accel_series: Vec<(u64, f64)> = x.grid.iter().map(|&n| (n, mean_wall(&x.cells, Strategy::AccelOnly, n))).collect();
    let knee = detect_saturation_knee(&accel_series).map_err(|e| e.to_string())?;
    for &n in x.grid.iter().filter(|&&n| n >= knee) {
        let naive = naive_sum(mean_wall(&x.cells, Strategy::CpuOnly, n), mean_wall(&x.cells, Strategy::AccelOnly, n));
        let h = mean_wall(&x.cells, Strategy::Hybrid, n);
        check(h < 0.95 * naive, format!("n={n}: hybrid {h:.3}s vs naive {naive:.3}s"))?;
    }
    Ok(format!("n={largest}: hybrid {h:.3}s vs best single {best:.3}s (ratio {:.2}, margin 5%); below naive sum from knee {knee}", h / best))
}

fn ac8() -> Outcome {
    let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
    let ok = (s.mean - 2.0).abs() < 1e-3
        && (s.std - 1.0).abs() < 1e-3
        && (s.ci95_low + 0.484).abs() < 1e-3
        && (s.ci95_high - 4.484).abs() < 1e-3;
    check(ok, format!("{s:?}"))?;
    Ok(format!("mean {:.3} std {:.3} ci95 [{:.3}, {:.3}] (tolerance 1e-3)", s.mean, s.std, s.ci95_low, s.ci95_high))
}

fn ac9() -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run_with(
        ["hetbench", "ea", "--model", "box", "--pop", "64", "--gens", "10", "--steps", "1000"],
        &mut out,
        &mut err,
    );
    check(code == 0, format!("exit {code}: {}", String::from_utf8_lossy(&err)))?;
    let text = String::from_utf8(out).unwrap();
    let fraction: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("evaluation_fraction="))
        .ok_or("no evaluation_fraction line")?
        .parse()
        .map_err(|e| format!("{e}"))?;
    check(fraction > 0.8, format!("evaluation fraction {fraction}"))?;
    Ok(format!("evaluation fraction {fraction:.3} (> 0.8)"))
}

fn random_record(rng: &mut ChaCha8Rng) -> RunRecord {
    let mut f = || match rng.next_u64() % 4 {
        0 => 0.0,
        1 => uniform(rng, 0.0, 1.0),
        2 => uniform(rng, 0.0, 1e6),
        _ => uniform(rng, 1e-9, 1e-3),
    };
    let (a, b, c, d, e, g) = (f(), f(), f(), f(), f(), f());
    RunRecord {
        model: ModelKind::ALL[(rng.next_u64() % 4) as usize],
        strategy: Strategy::ALL[(rng.next_u64() % 3) as usize],
        n_variants: 1 + rng.next_u64() % 1_000_000,
        steps: 1 + (rng.next_u64() % 10_000) as u32,
        rep: (rng.next_u64() % 5) as u32,
        wall_s: a,
        cpu_part_s: b,
        accel_part_s: c,
        accel_fraction: d,
        cpu_util_mean: e,
        accel_util_mean: g,
        status: if rng.next_u64().is_multiple_of(2) { RunStatus::Ok } else { RunStatus::Degraded },
        timestamp: format!("2026-01-01T00:00:{:02}.000Z", rng.next_u64() % 60),
    }
}

fn ac10(dir: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let records: Vec<RunRecord> = (0..1000).map(|_| random_record(&mut rng)).collect();
    let path = dir.join("roundtrip.csv");
    write_records(&records, RecordFormat::Csv, &path).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(&path).unwrap();
    check(text.lines().next() == Some(CSV_HEADER), "header differs")?;
    check(!text.contains('\r'), "CR line endings")?;
    let back = read_records_csv(&path).map_err(|e| e.to_string())?;
    let expected: Vec<RunRecord> = records.iter().map(RunRecord::quantized).collect();
    check(back == expected, "records changed beyond 6-digit quantization")?;
    let figures = emit_figures(&SweepResults::from_records(back), &dir.join("roundtrip-figures")).map_err(|e| e.to_string())?;
    Ok(format!("1000 records round-trip, header bit-exact, plot wrote {} files", figures.len()))
}

// Columns that do not depend on a measured wall clock.
fn stable_columns(r: &RunRecord) -> Vec<String> {
    let f = r.to_csv_fields();
    let mut cols = vec![f[0].clone(), f[1].clone(), f[2].clone(), f[3].clone(), f[4].clone(), f[11].clone()];
    match r.strategy {
        Strategy::AccelOnly => cols.extend([5, 6, 7, 8, 9, 10].map(|i| f[i].clone())),
        Strategy::CpuOnly => cols.extend([7, 8, 10].map(|i| f[i].clone())),
        Strategy::Hybrid => {}
    }
    cols
}

fn ac11(dir: &Path) -> Outcome {
    let run = |sub: &str| {
        let mut c = SweepConfig::new(vec![ModelKind::Box, ModelKind::BoxAndBall, ModelKind::ArmWithRope]);
        c.variants_per_model.insert(ModelKind::Box, vec![32, 128, 256, 512, 1024, 2056]);
        c.variants_per_model.insert(ModelKind::BoxAndBall, vec![32, 128, 256]);
        c.variants_per_model.insert(ModelKind::ArmWithRope, vec![8, 32]);
        c.steps_list = vec![50, 100];
        c.device = DevicePerfModel::new(0.05, 256, 2e-4).unwrap();
        c.orchestration_overhead_s = 0.01;
        c.output_dir = dir.join(sub);
        run_sweep(&c, false).unwrap();
        read_records_csv(&dir.join(sub).join("results.csv")).unwrap()
    };
    let (a, b) = (run("first"), run("second"));
    check(a.len() == b.len(), "row counts differ")?;
    for (x, y) in a.iter().zip(&b) {
        check(stable_columns(x) == stable_columns(y), format!("row {:?} differs", x.key()))?;
    }
    Ok(format!("{} rows identical in non-measured columns across two runs", a.len()))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let started = Instant::now();
    let mut crossover: Option<Crossover> = None;
    let mut failures = 0;

    let criteria: Vec<(&str, &str)> = vec![
        ("AC1", "executor equivalence"),
        ("AC2", "saturation law"),
        ("AC3", "reverse-ratio allocation"),
        ("AC4", "heuristic vs oracle"),
        ("AC5", "overhead domination"),
        ("AC6", "crossover reproduction"),
        ("AC7", "hybrid asymptotics"),
        ("AC8", "statistics"),
        ("AC9", "evolutionary loop profile"),
        ("AC10", "persistence"),
        ("AC11", "determinism"),
    ];
    for (id, name) in criteria {
        let t = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(|| match id {
            "AC1" => ac1(),
            "AC2" => ac2(),
            "AC3" => ac3(),
            "AC4" => ac4(),
            "AC5" => ac5(),
            "AC6" | "AC7" => {
                let x = crossover.get_or_insert_with(|| crossover_sweep(&dir.path().join("crossover")));
                if id == "AC6" {
                    ac6(x)
                } else {
                    ac7(x)
                }
            }
            "AC8" => ac8(),
            "AC9" => ac9(),
            "AC10" => ac10(dir.path()),
            _ => ac11(dir.path()),
        }))
        .unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {id:<4} {name}: {detail} [{secs:.1}s]"),
            Err(why) => {
                failures += 1;
                println!("FAIL {id:<4} {name}: {why} [{secs:.1}s]");
            }
        }
    }
    println!("{} of 11 criteria passed in {:.1}s", 11 - failures, started.elapsed().as_secs_f64());
    if failures > 0 {
        std::process::exit(1);
    }
}
