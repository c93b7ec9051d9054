//! Sweeps over (model × variants × steps × repetition × strategy) grids,
//! with crash-safe persistence and SVG figures.

mod config;
mod figures;
mod records;
mod svg;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{paper_variant_grid, SweepConfig, PAPER_STEPS, PAPER_REPETITIONS};
pub use figures::{aggregate, emit_figures, CellStats};
pub use records::{
    format_sig6, read_records_csv, read_records_jsonl, write_records, RecordFormat, RecordKey, RecordSink,
    RunRecord, RunStatus, CSV_HEADER,
};
pub use sweep::{expected_row_count, planned_cells, run_sweep, Cell, SweepResults};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("nothing to plot")]
    EmptyResults,
}

/// Which back-end arrangement a row measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(alias = "cpu_only")]
    CpuOnly,
    #[serde(alias = "accel_only")]
    AccelOnly,
    #[serde(alias = "hybrid")]
    Hybrid,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::CpuOnly, Strategy::AccelOnly, Strategy::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::CpuOnly => "CpuOnly",
            Strategy::AccelOnly => "AccelOnly",
            Strategy::Hybrid => "Hybrid",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "CpuOnly" | "cpu_only" => Ok(Strategy::CpuOnly),
            "AccelOnly" | "accel_only" => Ok(Strategy::AccelOnly),
            "Hybrid" | "hybrid" => Ok(Strategy::Hybrid),
            _ => Err(format!("unknown strategy '{s}'")),
        }
    }
}
