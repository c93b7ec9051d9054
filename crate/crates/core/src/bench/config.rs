use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BenchError, Strategy};
use crate::executor::{available_cores, DevicePerfModel, TimingMode};
use crate::simkernel::ModelKind;

pub const PAPER_STEPS: u32 = 1000;
pub const PAPER_REPETITIONS: u32 = 3;

// "2056" is kept as published; it is almost certainly a typo for 2048.
const PAPER_GRID: [u64; 14] = [
    32, 128, 256, 512, 1024, 2056, 4096, 8192, 16384, 32768, 65536, 131072, 256000, 512000,
];

/// Published variant counts per model; heavier models stop earlier because of memory limits.
pub fn paper_variant_grid(kind: ModelKind) -> Vec<u64> {
    let len = match kind {
        ModelKind::Box | ModelKind::BoxAndBall => 14,
        ModelKind::ArmWithRope => 13,
        ModelKind::Humanoid => 10,
    };
    PAPER_GRID[..len].to_vec()
}

fn default_steps() -> Vec<u32> {
    vec![PAPER_STEPS]
}

fn default_repetitions() -> u32 {
    PAPER_REPETITIONS
}

fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

fn default_workers() -> usize {
    available_cores()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("hetbench-out")
}

/// Sweep description, loadable from TOML or JSON. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub models: Vec<ModelKind>,
    /// Models without an entry use the published grid.
    #[serde(default)]
    pub variants_per_model: BTreeMap<ModelKind, Vec<u64>>,
    #[serde(default = "default_steps")]
    pub steps_list: Vec<u32>,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub device: DevicePerfModel,
    /// Per-model device parameters that replace `device`.
    #[serde(default)]
    pub device_overrides: BTreeMap<ModelKind, DevicePerfModel>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub mode: TimingMode,
    /// Stand-in for device memory limits: larger variant counts are dropped.
    #[serde(default)]
    pub max_variants_cap: BTreeMap<ModelKind, u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Fixed per-run cost of orchestrating both back-ends, seconds.
    #[serde(default)]
    pub orchestration_overhead_s: f64,
    /// Minimum exact share that still earns a back-end one variant; default `1/(2n)`.
    #[serde(default)]
    pub floor_fraction: Option<f64>,
    /// Calibration batch size; default is the model's largest variant count.
    #[serde(default)]
    pub calibration_probe_n: Option<u64>,
}

impl SweepConfig {
    /// A config over `models` with every other field at its default.
    pub fn new(models: Vec<ModelKind>) -> SweepConfig {
        SweepConfig {
            models,
            variants_per_model: BTreeMap::new(),
            steps_list: default_steps(),
            repetitions: default_repetitions(),
            strategies: default_strategies(),
            device: DevicePerfModel::default(),
            device_overrides: BTreeMap::new(),
            workers: default_workers(),
            mode: TimingMode::Modeled,
            max_variants_cap: BTreeMap::new(),
            output_dir: default_output_dir(),
            orchestration_overhead_s: 0.0,
            floor_fraction: None,
            calibration_probe_n: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<SweepConfig, BenchError> {
        let config: SweepConfig = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_str(text: &str) -> Result<SweepConfig, BenchError> {
        let config: SweepConfig = serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads by extension: `.json` as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<SweepConfig, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let err = |m: String| Err(BenchError::Config(m));
        if self.models.is_empty() {
            return err("models must not be empty".into());
        }
        if self.repetitions == 0 {
            return err("repetitions must be >= 1".into());
        }
        if self.workers == 0 {
            return err("workers must be >= 1".into());
        }
        if self.strategies.is_empty() {
            return err("strategies must not be empty".into());
        }
        if self.steps_list.is_empty() || self.steps_list.contains(&0) {
            return err("steps_list must be non-empty and every entry >= 1".into());
        }
        if self.steps_list.windows(2).any(|w| w[0] >= w[1]) {
            return err("steps_list must be strictly increasing".into());
        }
        if self.orchestration_overhead_s.is_nan() || self.orchestration_overhead_s < 0.0 {
            return err("orchestration_overhead_s must be >= 0".into());
        }
        if self.calibration_probe_n == Some(0) {
            return err("calibration_probe_n must be >= 1".into());
        }
        for (kind, list) in &self.variants_per_model {
            if list.is_empty() || list.contains(&0) {
                return err(format!("variants for {kind} must be non-empty and >= 1"));
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return err(format!("variants for {kind} must be strictly increasing"));
            }
        }
        for device in std::iter::once(&self.device).chain(self.device_overrides.values()) {
            device.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        }
        for &kind in &self.models {
            if self.variants(kind).is_empty() {
                return err(format!("max_variants_cap leaves no variant counts for {kind}"));
            }
        }
        Ok(())
    }

    /// Variant counts for `kind` after applying its cap.
    pub fn variants(&self, kind: ModelKind) -> Vec<u64> {
        let list = self
            .variants_per_model
            .get(&kind)
            .cloned()
            .unwrap_or_else(|| paper_variant_grid(kind));
        match self.max_variants_cap.get(&kind) {
            Some(&cap) => list.into_iter().filter(|&n| n <= cap).collect(),
            None => list,
        }
    }

    pub fn device_for(&self, kind: ModelKind) -> DevicePerfModel {
        self.device_overrides.get(&kind).copied().unwrap_or(self.device)
    }

    /// Enabled strategies in canonical order, without duplicates.
    pub fn strategy_order(&self) -> Vec<Strategy> {
        Strategy::ALL
            .into_iter()
            .filter(|s| self.strategies.contains(s))
            .collect()
    }

    pub fn probe_size(&self, kind: ModelKind) -> u64 {
        self.calibration_probe_n
            .unwrap_or_else(|| self.variants(kind).last().copied().unwrap_or(1))
    }
}
