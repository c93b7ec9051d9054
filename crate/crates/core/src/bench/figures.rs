//! Aggregation of sweep rows and the SVG figures drawn from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;

use super::records::{format_sig6, RunRecord};
use super::svg::{utilization_color, Band, Bar, Chart, Dot, Line, PALETTE};
use super::{BenchError, Strategy, SweepResults};
use crate::monitor::{summarize, Stats};
use crate::simkernel::ModelKind;

/// Repetitions of one (model, strategy, variants, steps) cell, summarized.
/// Error rows are left out; `errors` counts them.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub model: ModelKind,
    pub strategy: Strategy,
    pub n_variants: u64,
    pub steps: u32,
    pub wall: Stats,
    pub cpu_part_mean: f64,
    pub accel_part_mean: f64,
    pub accel_fraction_mean: f64,
    pub cpu_util_mean: f64,
    pub accel_util_mean: f64,
    pub errors: usize,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Groups rows by cell and summarizes each group, ordered by
/// (model, strategy, steps, variants). Cells with only error rows are dropped.
pub fn aggregate(records: &[RunRecord]) -> Vec<CellStats> {
    let mut groups: BTreeMap<(ModelKind, Strategy, u32, u64), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.model, r.strategy, r.steps, r.n_variants))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .filter_map(|((model, strategy, steps, n_variants), rows)| {
            let ok: Vec<&RunRecord> = rows.iter().copied().filter(|r| !r.is_error()).collect();
            let walls: Vec<f64> = ok.iter().map(|r| r.wall_s).collect();
            let wall = summarize(&walls).ok()?;
            Some(CellStats {
                model,
                strategy,
                n_variants,
                steps,
                wall,
                cpu_part_mean: mean(ok.iter().map(|r| r.cpu_part_s)),
                accel_part_mean: mean(ok.iter().map(|r| r.accel_part_s)),
                accel_fraction_mean: mean(ok.iter().map(|r| r.accel_fraction)),
                cpu_util_mean: mean(ok.iter().map(|r| r.cpu_util_mean)),
                accel_util_mean: mean(ok.iter().map(|r| r.accel_util_mean)),
                errors: rows.len() - ok.len(),
            })
        })
        .collect()
}

const SIDECAR_HEADER: &str =
    "model,strategy,n_variants,steps,n,mean,std,ci95_low,ci95_high,p95,cpu_part_mean,accel_part_mean,accel_fraction_mean,accel_util_mean,errors";

fn sidecar(cells: &[&CellStats]) -> String {
    let mut s = format!("{SIDECAR_HEADER}\n");
    for c in cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.model,
            c.strategy,
            c.n_variants,
            c.steps,
            c.wall.n,
            format_sig6(c.wall.mean),
            format_sig6(c.wall.std),
            format_sig6(c.wall.ci95_low),
            format_sig6(c.wall.ci95_high),
            format_sig6(c.wall.p95),
            format_sig6(c.cpu_part_mean),
            format_sig6(c.accel_part_mean),
            format_sig6(c.accel_fraction_mean),
            format_sig6(c.accel_util_mean),
            c.errors
        );
    }
    s
}

fn strategy_color(s: Strategy) -> &'static str {
    match s {
        Strategy::CpuOnly => PALETTE[0],
        Strategy::AccelOnly => PALETTE[1],
        Strategy::Hybrid => PALETTE[2],
    }
}

struct Emitter<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Emitter<'_> {
    fn write(&mut self, stem: &str, chart: &Chart, cells: &[&CellStats]) -> Result<(), BenchError> {
        let svg = self.dir.join(format!("{stem}.svg"));
        let csv = self.dir.join(format!("{stem}.csv"));
        std::fs::write(&svg, chart.render())?;
        std::fs::write(&csv, sidecar(cells))?;
        self.written.push(svg);
        self.written.push(csv);
        Ok(())
    }
}

fn wall_vs_variants(model: ModelKind, steps: u32, cells: &[&CellStats]) -> Chart {
    let mut chart = Chart {
        title: format!("{model}: wall time vs variants ({steps} steps)"),
        x_label: "variants".into(),
        y_label: "wall time (s)".into(),
        log_x: true,
        ..Chart::default()
    };
    for s in Strategy::ALL {
        let series: Vec<&&CellStats> = cells.iter().filter(|c| c.strategy == s).collect();
        if series.is_empty() {
            continue;
        }
        let color = strategy_color(s).to_string();
        chart.bands.push(Band {
            color: color.clone(),
            points: series
                .iter()
                .map(|c| (c.n_variants as f64, c.wall.ci95_low, c.wall.ci95_high))
                .collect(),
        });
        chart.lines.push(Line {
            label: s.name().into(),
            color,
            points: series.iter().map(|c| (c.n_variants as f64, c.wall.mean)).collect(),
            dashed: false,
        });
    }
    chart
}

fn accel_utilization(model: ModelKind, steps: u32, cells: &[&CellStats]) -> Chart {
    Chart {
        title: format!("{model}: accelerator wall time and utilization ({steps} steps)"),
        x_label: "variants".into(),
        y_label: "wall time (s)".into(),
        log_x: true,
        dots: cells
            .iter()
            .map(|c| Dot {
                x: c.n_variants as f64,
                y: c.wall.mean,
                color: utilization_color(c.accel_util_mean),
            })
            .collect(),
        notes: vec![
            (utilization_color(0.0), "0% utilization".into()),
            (utilization_color(50.0), "50%".into()),
            (utilization_color(100.0), "100%".into()),
        ],
        ..Chart::default()
    }
}

fn hybrid_breakdown(model: ModelKind, steps: u32, cells: &[&CellStats]) -> Chart {
    let by = |s: Strategy| -> BTreeMap<u64, &CellStats> {
        cells
            .iter()
            .filter(|c| c.strategy == s)
            .map(|c| (c.n_variants, *c))
            .collect()
    };
    let hybrid = by(Strategy::Hybrid);
    let mut chart = Chart {
        title: format!("{model}: hybrid split ({steps} steps)"),
        x_label: "variants".into(),
        y_label: "time (s)".into(),
        log_x: true,
        bar_label: Some("accel share".into()),
        ..Chart::default()
    };
    let (cpu, accel) = (by(Strategy::CpuOnly), by(Strategy::AccelOnly));
    for (s, m, label) in [(Strategy::CpuOnly, &cpu, "CPU sequential"), (Strategy::AccelOnly, &accel, "accel sequential")] {
        if !m.is_empty() {
            chart.lines.push(Line {
                label: label.into(),
                color: strategy_color(s).into(),
                points: m.values().map(|c| (c.n_variants as f64, c.wall.mean)).collect(),
                dashed: true,
            });
        }
    }
    // both sequential runs back to back on the same batch
    let naive: Vec<(f64, f64)> = cpu
        .iter()
        .filter_map(|(n, c)| accel.get(n).map(|a| (*n as f64, c.wall.mean + a.wall.mean)))
        .collect();
    if !naive.is_empty() {
        chart.lines.push(Line {
            label: "naive sum".into(),
            color: PALETTE[4].into(),
            points: naive,
            dashed: true,
        });
    }
    chart.lines.push(Line {
        label: "combined".into(),
        color: strategy_color(Strategy::Hybrid).into(),
        points: hybrid.values().map(|c| (c.n_variants as f64, c.wall.mean)).collect(),
        dashed: false,
    });
    chart.bars = hybrid
        .values()
        .map(|c| Bar {
            x: c.n_variants as f64,
            percent: 100.0 * c.accel_fraction_mean,
        })
        .collect();
    chart
}

fn wall_vs_steps(model: ModelKind, n_variants: u64, cells: &[&CellStats]) -> Chart {
    let mut chart = Chart {
        title: format!("{model}: wall time vs steps ({n_variants} variants)"),
        x_label: "steps".into(),
        y_label: "wall time (s)".into(),
        log_x: true,
        ..Chart::default()
    };
    for s in Strategy::ALL {
        let series: Vec<&&CellStats> = cells.iter().filter(|c| c.strategy == s).collect();
        if !series.is_empty() {
            chart.lines.push(Line {
                label: s.name().into(),
                color: strategy_color(s).into(),
                points: series.iter().map(|c| (c.steps as f64, c.wall.mean)).collect(),
                dashed: false,
            });
        }
    }
    chart
}

/// Writes every figure the results support into `out_dir`, each SVG with a
/// CSV of the numbers it shows. Returns the written paths.
///
/// Per model and step count: wall time against variants per strategy,
/// accelerator wall time colored by utilization, and the hybrid breakdown.
/// With two or more step counts, wall time against steps as well.
pub fn emit_figures(results: &SweepResults, out_dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let stats = aggregate(&results.records);
    if stats.is_empty() {
        return Err(BenchError::EmptyResults);
    }
    std::fs::create_dir_all(out_dir)?;
    let mut out = Emitter {
        dir: out_dir,
        written: Vec::new(),
    };
    let models: BTreeSet<ModelKind> = stats.iter().map(|c| c.model).collect();
    for model in models {
        let of_model: Vec<&CellStats> = stats.iter().filter(|c| c.model == model).collect();
        let steps_set: BTreeSet<u32> = of_model.iter().map(|c| c.steps).collect();
        for &steps in &steps_set {
            let cells: Vec<&CellStats> = of_model.iter().copied().filter(|c| c.steps == steps).collect();
            let stem = format!("{}_{steps}", model.name());
            out.write(&format!("{stem}_wall_vs_variants"), &wall_vs_variants(model, steps, &cells), &cells)?;

            let accel: Vec<&CellStats> = cells.iter().copied().filter(|c| c.strategy == Strategy::AccelOnly).collect();
            if !accel.is_empty() {
                out.write(&format!("{stem}_accel_utilization"), &accel_utilization(model, steps, &accel), &accel)?;
            }

            if cells.iter().any(|c| c.strategy == Strategy::Hybrid) {
                out.write(&format!("{stem}_hybrid_breakdown"), &hybrid_breakdown(model, steps, &cells), &cells)?;
            } else {
                info!("{model} at {steps} steps has no hybrid rows; skipping the hybrid breakdown figure");
            }
        }
        if steps_set.len() >= 2 {
            // the largest variant count measured at every step count
            let common = of_model
                .iter()
                .map(|c| c.n_variants)
                .collect::<BTreeSet<u64>>()
                .into_iter()
                .rev()
                .find(|&n| steps_set.iter().all(|&s| of_model.iter().any(|c| c.n_variants == n && c.steps == s)));
            if let Some(n) = common {
                let cells: Vec<&CellStats> = of_model.iter().copied().filter(|c| c.n_variants == n).collect();
                out.write(&format!("{}_wall_vs_steps", model.name()), &wall_vs_steps(model, n, &cells), &cells)?;
            }
        }
    }
    Ok(out.written)
}
