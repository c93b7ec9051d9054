//! Run records and their CSV / JSON-lines persistence.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BenchError, Strategy};
use crate::simkernel::ModelKind;

/// Column layout of `results.csv`. Changing it breaks every persisted sweep.
pub const CSV_HEADER: &str = "model,strategy,n_variants,steps,rep,wall_s,cpu_part_s,accel_part_s,accel_fraction,cpu_util_mean,accel_util_mean,degraded,timestamp";

/// Outcome marker stored in the `degraded` column: `false`, `true` or `error`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Degraded,
    Error,
}

impl RunStatus {
    fn as_csv(self) -> &'static str {
        match self {
            RunStatus::Ok => "false",
            RunStatus::Degraded => "true",
            RunStatus::Error => "error",
        }
    }

    fn from_csv(s: &str) -> Option<Self> {
        match s {
            "false" => Some(RunStatus::Ok),
            "true" => Some(RunStatus::Degraded),
            "error" => Some(RunStatus::Error),
            _ => None,
        }
    }
}

/// One row per (cell, repetition, strategy). Times are seconds, utilizations percent.
/// Error rows carry NaN times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: ModelKind,
    pub strategy: Strategy,
    pub n_variants: u64,
    pub steps: u32,
    pub rep: u32,
    pub wall_s: f64,
    pub cpu_part_s: f64,
    pub accel_part_s: f64,
    pub accel_fraction: f64,
    pub cpu_util_mean: f64,
    pub accel_util_mean: f64,
    pub status: RunStatus,
    pub timestamp: String,
}

/// Identity of a row within a sweep, used for resume.
pub type RecordKey = (ModelKind, Strategy, u64, u32, u32);

impl RunRecord {
    pub fn key(&self) -> RecordKey {
        (self.model, self.strategy, self.n_variants, self.steps, self.rep)
    }

    pub fn is_error(&self) -> bool {
        self.status == RunStatus::Error
    }

    pub fn to_csv_fields(&self) -> [String; 13] {
        [
            self.model.name().to_string(),
            self.strategy.name().to_string(),
            self.n_variants.to_string(),
            self.steps.to_string(),
            self.rep.to_string(),
            format_sig6(self.wall_s),
            format_sig6(self.cpu_part_s),
            format_sig6(self.accel_part_s),
            format_sig6(self.accel_fraction),
            format_sig6(self.cpu_util_mean),
            format_sig6(self.accel_util_mean),
            self.status.as_csv().to_string(),
            self.timestamp.clone(),
        ]
    }

    pub fn from_csv_fields(fields: &[&str]) -> Result<RunRecord, String> {
        if fields.len() != 13 {
            return Err(format!("expected 13 fields, got {}", fields.len()));
        }
        let float = |i: usize| fields[i].parse::<f64>().map_err(|e| format!("field {i} '{}': {e}", fields[i]));
        let int = |i: usize| fields[i].parse::<u64>().map_err(|e| format!("field {i} '{}': {e}", fields[i]));
        Ok(RunRecord {
            model: fields[0].parse().map_err(|e| format!("{e}"))?,
            strategy: fields[1].parse()?,
            n_variants: int(2)?,
            steps: u32::try_from(int(3)?).map_err(|e| e.to_string())?,
            rep: u32::try_from(int(4)?).map_err(|e| e.to_string())?,
            wall_s: float(5)?,
            cpu_part_s: float(6)?,
            accel_part_s: float(7)?,
            accel_fraction: float(8)?,
            cpu_util_mean: float(9)?,
            accel_util_mean: float(10)?,
            status: RunStatus::from_csv(fields[11]).ok_or_else(|| format!("bad degraded flag '{}'", fields[11]))?,
            timestamp: fields[12].to_string(),
        })
    }

    /// The record as it reads back from CSV, i.e. with floats cut to 6 significant digits.
    pub fn quantized(&self) -> RunRecord {
        let fields = self.to_csv_fields();
        let refs: Vec<&str> = fields.iter().map(String::as_str).collect();
        RunRecord::from_csv_fields(&refs).expect("own fields parse")
    }
}

/// `%g`-style formatting with 6 significant digits.
pub fn format_sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        format!("{}e{exp}", trim_zeros(mantissa))
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    JsonLines,
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// Writes `records` to `path`, replacing any existing file.
pub fn write_records(records: &[RunRecord], format: RecordFormat, path: &Path) -> Result<(), BenchError> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        RecordFormat::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            let mut w = csv_writer(&mut out);
            for r in records {
                w.write_record(r.to_csv_fields())?;
            }
            w.flush()?;
        }
        RecordFormat::JsonLines => {
            for r in records {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<RunRecord>, BenchError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(File::open(path)?);
    let mut rows = reader.records();
    match rows.next() {
        Some(Ok(h)) if h.iter().collect::<Vec<_>>().join(",") == CSV_HEADER => {}
        Some(Ok(h)) => {
            return Err(BenchError::Schema(format!(
                "{}: unexpected header '{}'",
                path.display(),
                h.iter().collect::<Vec<_>>().join(",")
            )))
        }
        Some(Err(e)) => return Err(e.into()),
        None => return Err(BenchError::Schema(format!("{}: empty file", path.display()))),
    }
    let mut records = Vec::new();
    for (line, row) in rows.enumerate() {
        let row = row?;
        let fields: Vec<&str> = row.iter().collect();
        let record = RunRecord::from_csv_fields(&fields)
            .map_err(|e| BenchError::Schema(format!("{} row {}: {e}", path.display(), line + 2)))?;
        records.push(record);
    }
    Ok(records)
}

pub fn read_records_jsonl(path: &Path) -> Result<Vec<RunRecord>, BenchError> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            records.push(serde_json::from_str(&line)?);
        }
    }
    Ok(records)
}

/// Append-only writer for a sweep in progress. Every row is flushed as soon
/// as it is written, so an interrupted sweep leaves complete rows behind.
#[derive(Debug)]
pub struct RecordSink {
    csv: File,
    jsonl: File,
}

impl RecordSink {
    /// Opens `results.csv` and `results.jsonl` under `dir`. Without `append`
    /// both files are truncated and a fresh header is written.
    pub fn open(dir: &Path, append: bool) -> Result<RecordSink, BenchError> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join("results.csv");
        let needs_header = !append || !csv_path.exists() || std::fs::metadata(&csv_path)?.len() == 0;
        let open = |p: &Path| -> std::io::Result<File> {
            if append {
                OpenOptions::new().create(true).append(true).open(p)
            } else {
                File::create(p)
            }
        };
        let mut csv = open(&csv_path)?;
        let jsonl = open(&dir.join("results.jsonl"))?;
        if needs_header {
            writeln!(csv, "{CSV_HEADER}")?;
            csv.flush()?;
        }
        Ok(RecordSink { csv, jsonl })
    }

    pub fn push(&mut self, record: &RunRecord) -> Result<(), BenchError> {
        let mut line = Vec::new();
        {
            let mut w = csv_writer(&mut line);
            w.write_record(record.to_csv_fields())?;
            w.flush()?;
        }
        self.csv.write_all(&line)?;
        self.csv.flush()?;
        let mut json = serde_json::to_vec(record)?;
        json.push(b'\n');
        self.jsonl.write_all(&json)?;
        self.jsonl.flush()?;
        Ok(())
    }
}
