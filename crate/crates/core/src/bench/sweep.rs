use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use chrono::{SecondsFormat, Utc};
use log::{info, warn};

use super::records::{read_records_csv, RecordKey, RecordSink, RunRecord, RunStatus};
use super::{BenchError, Strategy, SweepConfig};
use crate::executor::{BatchRequest, CpuExecutor, Executor, SyntheticExecutor};
use crate::scheduler::{self, CalibrationProfile};
use crate::simkernel::ModelKind;

/// One (model, variants, steps) point of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub model: ModelKind,
    pub n_variants: u64,
    pub steps: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResults {
    /// Every row of the sweep, including rows kept from a resumed run.
    pub records: Vec<RunRecord>,
    pub calibrations: Vec<CalibrationProfile>,
    /// Rows skipped because a resumed output already had them.
    pub skipped: usize,
}

impl SweepResults {
    pub fn from_records(records: Vec<RunRecord>) -> SweepResults {
        SweepResults {
            records,
            ..SweepResults::default()
        }
    }

    pub fn any_degraded(&self) -> bool {
        self.records.iter().any(|r| r.status != RunStatus::Ok)
    }
}

/// Cells in execution order: model, then variants ascending, then steps ascending.
pub fn planned_cells(config: &SweepConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &model in &config.models {
        for n_variants in config.variants(model) {
            for &steps in &config.steps_list {
                cells.push(Cell {
                    model,
                    n_variants,
                    steps,
                });
            }
        }
    }
    cells
}

/// Σ over cells of |strategies| × repetitions.
pub fn expected_row_count(config: &SweepConfig) -> usize {
    planned_cells(config).len() * config.strategy_order().len() * config.repetitions as usize
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn error_record(cell: Cell, strategy: Strategy, rep: u32) -> RunRecord {
    RunRecord {
        model: cell.model,
        strategy,
        n_variants: cell.n_variants,
        steps: cell.steps,
        rep,
        wall_s: f64::NAN,
        cpu_part_s: f64::NAN,
        accel_part_s: f64::NAN,
        accel_fraction: f64::NAN,
        cpu_util_mean: f64::NAN,
        accel_util_mean: f64::NAN,
        status: RunStatus::Error,
        timestamp: now(),
    }
}

struct Runner<'a> {
    config: &'a SweepConfig,
    cpu: CpuExecutor,
    calibrations: BTreeMap<(ModelKind, u32), CalibrationProfile>,
}

impl Runner<'_> {
    fn accel(&self, model: ModelKind) -> Result<SyntheticExecutor, String> {
        SyntheticExecutor::new(self.config.device_for(model), self.config.mode).map_err(|e| e.to_string())
    }

    fn run(&mut self, cell: Cell, strategy: Strategy, rep: u32) -> Result<RunRecord, String> {
        let request = BatchRequest::range(cell.model, cell.n_variants, cell.steps).map_err(|e| e.to_string())?;
        let accel = self.accel(cell.model)?;
        let base = RunRecord {
            model: cell.model,
            strategy,
            n_variants: cell.n_variants,
            steps: cell.steps,
            rep,
            wall_s: 0.0,
            cpu_part_s: 0.0,
            accel_part_s: 0.0,
            accel_fraction: 0.0,
            cpu_util_mean: 0.0,
            accel_util_mean: 0.0,
            status: RunStatus::Ok,
            timestamp: String::new(),
        };
        let record = match strategy {
            Strategy::CpuOnly => {
                let out = self.cpu.run_batch(&request).map_err(|e| e.to_string())?;
                RunRecord {
                    wall_s: out.wall_time,
                    cpu_part_s: out.wall_time,
                    cpu_util_mean: out.mean_utilization(),
                    ..base
                }
            }
            Strategy::AccelOnly => {
                let out = accel.run_batch(&request).map_err(|e| e.to_string())?;
                RunRecord {
                    wall_s: out.wall_time,
                    accel_part_s: out.wall_time,
                    accel_fraction: 1.0,
                    accel_util_mean: out.mean_utilization(),
                    ..base
                }
            }
            Strategy::Hybrid => {
                let key = (cell.model, cell.steps);
                let profile = match self.calibrations.get(&key) {
                    Some(p) => *p,
                    None => {
                        let probe = self.config.probe_size(cell.model);
                        info!("calibrating {} at {} steps with {probe} variants", cell.model, cell.steps);
                        let p = scheduler::calibrate(cell.model, cell.steps, probe, &self.cpu, &accel)
                            .map_err(|e| e.to_string())?;
                        self.calibrations.insert(key, p);
                        p
                    }
                };
                let plan = scheduler::plan_allocation_with_floor(&profile, cell.n_variants, self.config.floor_fraction)
                    .map_err(|e| e.to_string())?;
                let out = scheduler::run_hybrid(
                    &plan,
                    &request,
                    &self.cpu,
                    &accel,
                    self.config.orchestration_overhead_s,
                    self.config.mode,
                )
                .map_err(|e| e.to_string())?;
                RunRecord {
                    wall_s: out.wall_combined,
                    cpu_part_s: out.t_cpu_part,
                    accel_part_s: out.t_accel_part,
                    accel_fraction: plan.accel_fraction,
                    cpu_util_mean: out.cpu_batch.as_ref().map_or(0.0, |b| b.mean_utilization()),
                    accel_util_mean: out.accel_batch.as_ref().map_or(0.0, |b| b.mean_utilization()),
                    status: if out.degraded { RunStatus::Degraded } else { RunStatus::Ok },
                    ..base
                }
            }
        };
        Ok(RunRecord { timestamp: now(), ..record })
    }
}

/// Runs every (cell, repetition, strategy) of `config`, appending each row to
/// `results.csv` and `results.jsonl` under the output directory as it completes.
///
/// With `resume`, rows already present in an existing `results.csv` are kept
/// and not re-run. A failing row is recorded with an error marker and the
/// sweep moves on.
pub fn run_sweep(config: &SweepConfig, resume: bool) -> Result<SweepResults, BenchError> {
    config.validate()?;
    let out_dir = config.output_dir.as_path();
    let existing = if resume { load_existing(out_dir)? } else { Vec::new() };
    let done: HashSet<RecordKey> = existing.iter().map(RunRecord::key).collect();
    let mut sink = RecordSink::open(out_dir, resume)?;

    let mut runner = Runner {
        config,
        cpu: CpuExecutor::new(config.workers).map_err(|e| BenchError::Config(e.to_string()))?,
        calibrations: BTreeMap::new(),
    };
    let mut results = SweepResults {
        records: existing,
        ..SweepResults::default()
    };
    let strategies = config.strategy_order();

    for cell in planned_cells(config) {
        for rep in 0..config.repetitions {
            for &strategy in &strategies {
                let key = (cell.model, strategy, cell.n_variants, cell.steps, rep);
                if done.contains(&key) {
                    results.skipped += 1;
                    continue;
                }
                let record = runner.run(cell, strategy, rep).unwrap_or_else(|e| {
                    warn!("{} n={} steps={} rep={rep} {strategy}: {e}", cell.model, cell.n_variants, cell.steps);
                    error_record(cell, strategy, rep)
                });
                sink.push(&record)?;
                results.records.push(record);
            }
        }
    }
    results.calibrations = runner.calibrations.into_values().collect();
    Ok(results)
}

fn load_existing(dir: &Path) -> Result<Vec<RunRecord>, BenchError> {
    let path = dir.join("results.csv");
    if path.exists() {
        read_records_csv(&path)
    } else {
        Ok(Vec::new())
    }
}
