//! Deterministic particle/constraint micro-simulation.
//!
//! Each [`ModelKind`] is a fixed arrangement of unit-mass particles joined by
//! compliant distance constraints. A step is a semi-implicit Euler update
//! followed by a fixed number of position-projection sweeps and a ground
//! contact projection. Everything is a pure function of `(kind, seed, steps)`,
//! so a variant produces the same bits on any executor.

use std::fmt;
use std::hash::Hasher;
use std::str::FromStr;

use fnv::FnvHasher;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fixed integration timestep, seconds.
pub const DT: f64 = 0.002;
/// Gravitational acceleration along z, m/s².
pub const GRAVITY: f64 = -9.81;
/// Position-projection sweeps per step.
pub const SOLVER_ITERATIONS: usize = 8;
/// Allowed ground penetration after projection, meters.
pub const CONTACT_TOLERANCE: f64 = 1e-6;
/// Any coordinate beyond this magnitude counts as a blow-up, meters.
pub const BLOWUP_LIMIT: f64 = 1e6;

const DAMPING: f64 = 0.2;
const STIFFNESS: f64 = 1e4;

pub type Vec3 = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("numerical blow-up at t={time:.4}s (body {body})")]
    NumericalBlowup { time: f64, body: usize },
    #[error("timestep must be positive, got {0}")]
    InvalidTimestep(f64),
    #[error("at least one step is required")]
    ZeroSteps,
}

/// The four workload classes, cheapest first.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Box,
    BoxAndBall,
    ArmWithRope,
    Humanoid,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Box,
        ModelKind::BoxAndBall,
        ModelKind::ArmWithRope,
        ModelKind::Humanoid,
    ];

    pub const fn body_count(self) -> usize {
        match self {
            ModelKind::Box => 1,
            ModelKind::BoxAndBall => 2,
            ModelKind::ArmWithRope => 12,
            ModelKind::Humanoid => 32,
        }
    }

    /// Solver iterations times body count, the nominal per-step work.
    pub const fn cost_units(self) -> usize {
        SOLVER_ITERATIONS * self.body_count()
    }

    pub const fn name(self) -> &'static str {
        match self {
            ModelKind::Box => "box",
            ModelKind::BoxAndBall => "box_and_ball",
            ModelKind::ArmWithRope => "arm_with_rope",
            ModelKind::Humanoid => "humanoid",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("unknown model '{0}' (expected box, box_and_ball, arm_with_rope or humanoid)")]
pub struct ParseModelError(String);

impl FromStr for ModelKind {
    type Err = ParseModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| ParseModelError(s.to_string()))
    }
}

/// Distance constraint between two bodies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraint {
    pub a: usize,
    pub b: usize,
    /// Meters.
    pub rest_length: f64,
    /// Per unit mass, 1/s².
    pub stiffness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub constraints: Vec<Constraint>,
    /// Linear velocity damping, 1/s.
    pub damping: f64,
    pub time: f64,
    pub seed: u64,
}

/// Outcome of simulating one variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariantResult {
    pub seed: u64,
    /// Horizontal displacement of body 0, stored as raw bits so equality is exact.
    fitness_bits: u64,
    pub checksum: u64,
    pub steps_executed: u32,
}

impl VariantResult {
    /// Horizontal displacement of body 0 from its start, meters.
    pub fn fitness(&self) -> f64 {
        f64::from_bits(self.fitness_bits)
    }
}

/// Uniform `[0, 1)` from the top 53 bits of a 64-bit draw.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn layout(kind: ModelKind) -> (Vec<Vec3>, Vec<(usize, usize)>) {
    match kind {
        ModelKind::Box => (vec![[0.0, 0.0, 0.0]], Vec::new()),
        ModelKind::BoxAndBall => (vec![[0.0, 0.0, 0.0], [0.3, 0.0, 0.2]], vec![(0, 1)]),
        ModelKind::ArmWithRope => {
            let mut pos: Vec<Vec3> = (0..4).map(|i| [0.2 * i as f64, 0.0, 0.1 * i as f64]).collect();
            pos.extend((1..=8).map(|j| [0.6 + 0.1 * j as f64, 0.0, 0.3]));
            let mut edges: Vec<(usize, usize)> = (0..11).map(|i| (i, i + 1)).collect();
            edges.extend([(0, 2), (1, 3)]);
            (pos, edges)
        }
        ModelKind::Humanoid => {
            let mut pos: Vec<Vec3> = (0..8).map(|i| [0.0, 0.0, 0.15 * i as f64]).collect();
            let mut edges: Vec<(usize, usize)> = (0..7).map(|i| (i, i + 1)).collect();
            edges.extend((0..6).map(|i| (i, i + 2)));
            // arms hang off the shoulder (spine 6), legs off the pelvis (spine 0)
            let limbs: [(usize, Vec3, Vec3); 4] = [
                (6, [0.0, 0.9, 0.0], [0.0, 0.12, 0.0]),
                (6, [0.0, 0.9, 0.0], [0.0, -0.12, 0.0]),
                (0, [0.0, 0.0, 0.0], [0.1, 0.08, 0.0]),
                (0, [0.0, 0.0, 0.0], [0.1, -0.08, 0.0]),
            ];
            for (attach, base, dir) in limbs {
                let first = pos.len();
                for j in 1..=6 {
                    let j = j as f64;
                    pos.push([base[0] + dir[0] * j, base[1] + dir[1] * j, base[2] + dir[2] * j]);
                }
                let chain: Vec<usize> = std::iter::once(attach).chain(first..first + 6).collect();
                edges.extend(chain.windows(2).map(|w| (w[0], w[1])));
                edges.extend(chain.windows(3).map(|w| (w[0], w[2])));
            }
            (pos, edges)
        }
    }
}

fn dist(a: Vec3, b: Vec3) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Builds the initial world for `kind`, perturbed by `seed`.
///
/// The base height is drawn from `[0.5, 2.0)` m and the lateral velocity of
/// every body from `[-1, 1)` m/s on each horizontal axis.
pub fn build_model(kind: ModelKind, seed: u64) -> WorldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let height = 0.5 + 1.5 * unit(&mut rng);
    let vx = 2.0 * unit(&mut rng) - 1.0;
    let vy = 2.0 * unit(&mut rng) - 1.0;

    let (offsets, edges) = layout(kind);
    let positions: Vec<Vec3> = offsets
        .iter()
        .map(|o| [o[0], o[1], o[2] + height])
        .collect();
    let velocities = vec![[vx, vy, 0.0]; positions.len()];
    let constraints = edges
        .into_iter()
        .map(|(a, b)| Constraint {
            a,
            b,
            rest_length: dist(positions[a], positions[b]),
            stiffness: STIFFNESS,
        })
        .collect();

    WorldState {
        positions,
        velocities,
        constraints,
        damping: DAMPING,
        time: 0.0,
        seed,
    }
}

/// Reusable per-step buffers, so long runs do not allocate every step.
#[derive(Debug, Default)]
struct Scratch {
    predicted: Vec<Vec3>,
    unprojected: Vec<Vec3>,
    lambdas: Vec<f64>,
}

impl Scratch {
    fn advance(&mut self, state: &mut WorldState, dt: f64) -> Result<(), SimError> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(SimError::InvalidTimestep(dt));
        }
        // constraint-free worlds dissipate on their own; only coupled ones need the limiter
        let ceiling = (!state.constraints.is_empty()).then(|| total_energy(state));
        let decay = 1.0 - state.damping * dt;

        self.predicted.clear();
        for (x, v) in state.positions.iter().zip(state.velocities.iter_mut()) {
            v[2] += GRAVITY * dt;
            for c in v.iter_mut() {
                *c *= decay;
            }
            self.predicted.push([x[0] + v[0] * dt, x[1] + v[1] * dt, x[2] + v[2] * dt]);
        }
        self.unprojected.clear();
        self.unprojected.extend_from_slice(&self.predicted);

        // compliant projection with accumulated multipliers, unit masses
        let predicted = &mut self.predicted;
        self.lambdas.clear();
        self.lambdas.resize(state.constraints.len(), 0.0);
        for _ in 0..SOLVER_ITERATIONS {
            for (c, lambda) in state.constraints.iter().zip(self.lambdas.iter_mut()) {
                let pa = predicted[c.a];
                let pb = predicted[c.b];
                let d = [pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]];
                let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if len <= f64::EPSILON {
                    continue;
                }
                let n = [d[0] / len, d[1] / len, d[2] / len];
                let alpha = 1.0 / (c.stiffness * dt * dt);
                let dl = (-(len - c.rest_length) - alpha * *lambda) / (2.0 + alpha);
                *lambda += dl;
                for k in 0..3 {
                    predicted[c.a][k] -= n[k] * dl;
                    predicted[c.b][k] += n[k] * dl;
                }
            }
        }

        for ((p, u), v) in predicted
            .iter_mut()
            .zip(&self.unprojected)
            .zip(state.velocities.iter_mut())
        {
            let mut contact = false;
            if p[2] < 0.0 {
                p[2] = 0.0;
                contact = true;
            }
            // corrections feed back into velocity; untouched bodies keep theirs bit-exact
            for k in 0..3 {
                if p[k] != u[k] {
                    v[k] += (p[k] - u[k]) / dt;
                }
            }
            if contact && v[2] < 0.0 {
                v[2] = 0.0;
            }
        }
        state.positions.clear();
        state.positions.extend_from_slice(predicted);
        state.time += dt;
        if let Some(ceiling) = ceiling {
            limit_energy(state, ceiling);
        }

        for (body, (p, v)) in state.positions.iter().zip(&state.velocities).enumerate() {
            if p.iter().chain(v).any(|c| !c.is_finite() || c.abs() > BLOWUP_LIMIT) {
                return Err(SimError::NumericalBlowup {
                    time: state.time,
                    body,
                });
            }
        }
        Ok(())
    }
}

/// Advances `state` by one timestep in place.
pub fn step_in_place(state: &mut WorldState, dt: f64) -> Result<(), SimError> {
    Scratch::default().advance(state, dt)
}

/// Rescales velocities so that total energy does not exceed `ceiling`.
///
/// Projection of stiff constraints against the ground can convert a little
/// contact correction into spring energy; the excess is taken out of the
/// kinetic term.
fn limit_energy(state: &mut WorldState, ceiling: f64) {
    let energy = total_energy(state);
    if energy <= ceiling {
        return;
    }
    let kinetic = kinetic_energy(state);
    let target = (kinetic - (energy - ceiling)).max(0.0);
    let scale = if kinetic > 0.0 { (target / kinetic).sqrt() } else { 0.0 };
    for v in &mut state.velocities {
        for c in v.iter_mut() {
            *c *= scale;
        }
    }
}

fn kinetic_energy(state: &WorldState) -> f64 {
    state
        .velocities
        .iter()
        .map(|v| 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))
        .sum()
}

/// Returns `state` advanced by one timestep.
pub fn step(mut state: WorldState, dt: f64) -> Result<WorldState, SimError> {
    step_in_place(&mut state, dt)?;
    Ok(state)
}

/// FNV-1a over the little-endian bytes of all positions, then all velocities.
pub fn checksum(state: &WorldState) -> u64 {
    let mut h = FnvHasher::default();
    for v in state.positions.iter().chain(&state.velocities) {
        for c in v {
            h.write(&c.to_le_bytes());
        }
    }
    h.finish()
}

pub fn result_of(initial: &WorldState, last: &WorldState, steps: u32) -> VariantResult {
    let (p0, p1) = (initial.positions[0], last.positions[0]);
    let fitness = ((p1[0] - p0[0]).powi(2) + (p1[1] - p0[1]).powi(2)).sqrt();
    VariantResult {
        seed: last.seed,
        fitness_bits: fitness.to_bits(),
        checksum: checksum(last),
        steps_executed: steps,
    }
}

/// Runs one variant for `steps` steps at [`DT`].
pub fn simulate(kind: ModelKind, seed: u64, steps: u32) -> Result<VariantResult, SimError> {
    if steps == 0 {
        return Err(SimError::ZeroSteps);
    }
    let initial = build_model(kind, seed);
    let mut state = initial.clone();
    let mut scratch = Scratch::default();
    for _ in 0..steps {
        scratch.advance(&mut state, DT)?;
    }
    Ok(result_of(&initial, &state, steps))
}

/// Kinetic + gravitational + constraint potential energy per unit mass.
pub fn total_energy(state: &WorldState) -> f64 {
    let kinetic = kinetic_energy(state);
    let gravity: f64 = state.positions.iter().map(|p| -GRAVITY * p[2]).sum();
    let springs: f64 = state
        .constraints
        .iter()
        .map(|c| {
            let stretch = dist(state.positions[c.a], state.positions[c.b]) - c.rest_length;
            0.5 * c.stiffness * stretch * stretch
        })
        .sum();
    kinetic + gravity + springs
}
