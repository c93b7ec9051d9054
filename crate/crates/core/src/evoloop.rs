//! A minimal (μ+λ) evolutionary loop over simulation seeds, with per-phase timing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::hash::Hasher;
use std::time::Instant;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{BatchRequest, Executor, ExecutorError};
use crate::simkernel::{ModelKind, VariantResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvoError {
    #[error("population size must be at least 2, got {0}")]
    PopulationTooSmall(usize),
    #[error("at least one generation is required")]
    NoGenerations,
    #[error(transparent)]
    Executor(#[from] ExecutorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Selection,
    Variation,
    Evaluation,
    Bookkeeping,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Selection, Phase::Variation, Phase::Evaluation, Phase::Bookkeeping];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Selection => "selection",
            Phase::Variation => "variation",
            Phase::Evaluation => "evaluation",
            Phase::Bookkeeping => "bookkeeping",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub genomes: Vec<u64>,
    /// Meters, same order as `genomes`.
    pub fitnesses: Vec<f64>,
    pub generation: u32,
}

impl Population {
    pub fn best_fitness(&self) -> f64 {
        self.fitnesses.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Cumulative seconds per phase, plus whatever fell between the timers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfile {
    pub phases: BTreeMap<Phase, f64>,
    pub unaccounted: f64,
    pub total: f64,
}

impl PhaseProfile {
    pub fn seconds(&self, phase: Phase) -> f64 {
        self.phases.get(&phase).copied().unwrap_or(0.0)
    }

    pub fn fraction(&self, phase: Phase) -> f64 {
        if self.total > 0.0 {
            self.seconds(phase) / self.total
        } else {
            0.0
        }
    }

    pub fn evaluation_fraction(&self) -> f64 {
        self.fraction(Phase::Evaluation)
    }

    fn add(&mut self, phase: Phase, since: Instant) {
        *self.phases.entry(phase).or_default() += since.elapsed().as_secs_f64();
    }
}

/// Child genome derived from a parent and the generation counter.
pub fn child_seed(parent: u64, generation: u32) -> u64 {
    let mut h = FnvHasher::default();
    h.write(&parent.to_le_bytes());
    h.write(&generation.to_le_bytes());
    h.finish()
}

fn evaluate(
    executor: &dyn Executor,
    kind: ModelKind,
    genomes: &[u64],
    steps: u32,
) -> Result<Vec<f64>, EvoError> {
    let request = BatchRequest::new(kind, genomes.to_vec(), steps)?;
    let out = executor.run_batch(&request)?;
    Ok(out.results.iter().map(VariantResult::fitness).collect())
}

/// Runs `generations` rounds of (μ+λ) with μ = λ = `population_size / 2`.
///
/// The initial genomes are `initial_seed..initial_seed + population_size`.
/// Each round keeps the best μ by fitness (ties broken by genome), derives
/// one child per parent, evaluates the children and merges them back in.
pub fn run_ea(
    kind: ModelKind,
    population_size: usize,
    generations: u32,
    steps: u32,
    executor: &dyn Executor,
    initial_seed: u64,
) -> Result<(Population, PhaseProfile), EvoError> {
    if population_size < 2 {
        return Err(EvoError::PopulationTooSmall(population_size));
    }
    if generations == 0 {
        return Err(EvoError::NoGenerations);
    }
    let mut profile = PhaseProfile::default();
    let started = Instant::now();

    let t = Instant::now();
    let genomes: Vec<u64> = (0..population_size as u64).map(|i| initial_seed.wrapping_add(i)).collect();
    profile.add(Phase::Bookkeeping, t);

    let t = Instant::now();
    let fitnesses = evaluate(executor, kind, &genomes, steps)?;
    profile.add(Phase::Evaluation, t);

    let mut pop = Population {
        genomes,
        fitnesses,
        generation: 0,
    };
    let mu = population_size / 2;
    let lambda = population_size - mu;

    for generation in 1..=generations {
        let t = Instant::now();
        let mut order: Vec<usize> = (0..pop.genomes.len()).collect();
        order.sort_by(|&a, &b| {
            pop.fitnesses[b]
                .total_cmp(&pop.fitnesses[a])
                .then(pop.genomes[a].cmp(&pop.genomes[b]))
        });
        let parents: Vec<(u64, f64)> = order[..mu].iter().map(|&i| (pop.genomes[i], pop.fitnesses[i])).collect();
        profile.add(Phase::Selection, t);

        let t = Instant::now();
        let children: Vec<u64> = (0..lambda)
            .map(|i| child_seed(parents[i % mu].0, generation))
            .collect();
        profile.add(Phase::Variation, t);

        let t = Instant::now();
        let child_fitness = evaluate(executor, kind, &children, steps)?;
        profile.add(Phase::Evaluation, t);

        let t = Instant::now();
        let (mut genomes, mut fitnesses): (Vec<u64>, Vec<f64>) = parents.into_iter().unzip();
        genomes.extend(children);
        fitnesses.extend(child_fitness);
        pop = Population {
            genomes,
            fitnesses,
            generation,
        };
        profile.add(Phase::Bookkeeping, t);
    }

    profile.total = started.elapsed().as_secs_f64();
    let accounted: f64 = profile.phases.values().sum();
    profile.unaccounted = (profile.total - accounted).max(0.0);
    Ok((pop, profile))
}

/// Fixed-width phase table sorted by time, followed by a `key=value` block.
pub fn report_profile(profile: &PhaseProfile) -> String {
    let mut rows: Vec<(Phase, f64)> = Phase::ALL.iter().map(|&p| (p, profile.seconds(p))).collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:>12} {:>9}", "phase", "seconds", "fraction");
    for (phase, secs) in &rows {
        let _ = writeln!(out, "{:<12} {:>12.6} {:>9.3}", phase.name(), secs, profile.fraction(*phase));
    }
    let _ = writeln!(out, "{:<12} {:>12.6}", "unaccounted", profile.unaccounted);
    let _ = writeln!(out, "{:<12} {:>12.6}", "total", profile.total);
    out.push('\n');
    for (phase, secs) in &rows {
        let _ = writeln!(out, "{}_s={secs:.6}", phase.name());
        let _ = writeln!(out, "{}_fraction={:.3}", phase.name(), profile.fraction(*phase));
    }
    let _ = writeln!(out, "unaccounted_s={:.6}", profile.unaccounted);
    let _ = writeln!(out, "total_s={:.6}", profile.total);
    out
}
