//! Binary particle swarm optimization.
//!
//! Two velocity rules share one loop:
//!
//! * [`Variant::VersionII`]: `V' = w·V + φ1·(Pbest − X) + φ2·(Gbest − X)` with
//!   `φ1 = c1·r1`, `φ2 = c2·r2` and a linearly decreasing inertia `w`.
//! * [`Variant::VersionI`]: `V' = x·[V + C1·(Pbest − X) + C2·(Gbest − X)]` where
//!   `x` is the constriction coefficient with a fresh `k ∈ [0, 1]` per update.
//!
//! Positions are resampled every step: bit `j` is 1 iff `r_j ≤ sigmoid(V_j)`.
//!
//! All randomness is drawn from per-particle [`RngStream`]s in particle order,
//! so where the fitness evaluations actually run has no influence on the
//! trajectory.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::bits::{BinaryPosition, FitnessReport, Particle, SwarmState, VelocityVector};
use crate::fitness::{EvalError, FitnessEvaluator};
use crate::rng::RngStream;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid engine config: {0}")]
    InvalidConfig(String),
    #[error("non-finite value {0} where a finite one is required")]
    NonFinite(f64),
    #[error("iteration {iter} exceeds I_max = {max}")]
    IterationOutOfRange { iter: usize, max: usize },
    #[error("constriction needs C1 + C2 >= 4, got {0}")]
    ConstrictionDomain(f64),
    #[error("constriction k must lie in [0, 1], got {0}")]
    ConstrictionK(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("evaluator returned {got} reports for {expected} particles")]
    BatchSize { expected: usize, got: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Constriction-coefficient velocity rule.
    VersionI,
    /// Inertia-weight velocity rule.
    VersionII,
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "VersionI" | "I" | "1" | "bpso1" => Ok(Variant::VersionI),
            "VersionII" | "II" | "2" | "bpso2" => Ok(Variant::VersionII),
            other => Err(format!("unknown variant {other:?} (expected VersionI|VersionII)")),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::VersionI => "VersionI",
            Variant::VersionII => "VersionII",
        })
    }
}

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn is_ordered(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }

    pub fn within_unit(&self) -> bool {
        self.is_ordered() && self.lo >= 0.0 && self.hi <= 1.0
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        rng.uniform(self.lo, self.hi)
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    /// Probability that a uniform draw on this interval is `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.lo == self.hi {
            return if x >= self.lo { 1.0 } else { 0.0 };
        }
        ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.lo, self.hi)
    }
}

impl FromStr for Interval {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().trim_start_matches('[').trim_end_matches(']');
        let (lo, hi) = s
            .split_once(',')
            .ok_or_else(|| format!("interval {s:?} must be `lo,hi`"))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad interval bound {t:?}"))
        };
        Ok(Interval::new(parse(lo)?, parse(hi)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub variant: Variant,
    /// Particle count `L`.
    pub particles: usize,
    /// Iteration budget `I_max`.
    pub max_iterations: usize,
    pub c1: f64,
    pub c2: f64,
    /// `C1` of the constriction rule.
    pub big_c1: f64,
    /// `C2` of the constriction rule.
    pub big_c2: f64,
    pub w_max: f64,
    pub w_min: f64,
    pub r_accel_range: Interval,
    pub r_threshold_range: Interval,
    pub target_fitness: f64,
    pub init_ones_fraction_range: Interval,
    pub velocity_clamp: Option<Interval>,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            variant: Variant::VersionII,
            particles: 10,
            max_iterations: 100,
            c1: 1.0,
            c2: 1.0,
            big_c1: 2.05,
            big_c2: 2.05,
            w_max: 0.9,
            w_min: 0.4,
            r_accel_range: Interval::new(0.1, 0.5),
            r_threshold_range: Interval::new(0.1, 0.5),
            target_fitness: 95.0,
            init_ones_fraction_range: Interval::new(0.85, 1.0),
            velocity_clamp: None,
            seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidConfig(m));
        if self.particles == 0 {
            return bad("L must be positive".into());
        }
        if self.max_iterations == 0 {
            return bad("I_max must be positive".into());
        }
        if self.w_min.is_nan() || self.w_max.is_nan() || self.w_min > self.w_max {
            return bad(format!("w_min {} > w_max {}", self.w_min, self.w_max));
        }
        for (name, r) in [
            ("r_accel_range", self.r_accel_range),
            ("r_threshold_range", self.r_threshold_range),
            ("init_ones_fraction_range", self.init_ones_fraction_range),
        ] {
            if !r.within_unit() {
                return bad(format!("{name} [{}, {}] must be ordered and inside [0, 1]", r.lo, r.hi));
            }
        }
        if let Some(c) = self.velocity_clamp {
            if !c.is_ordered() {
                return bad(format!("velocity_clamp [{}, {}] must be ordered", c.lo, c.hi));
            }
        }
        if self.variant == Variant::VersionI && self.big_c1 + self.big_c2 < 4.0 {
            return Err(EngineError::ConstrictionDomain(self.big_c1 + self.big_c2));
        }
        Ok(())
    }
}

pub fn sigmoid(v: f64) -> Result<f64, EngineError> {
    if !v.is_finite() {
        return Err(EngineError::NonFinite(v));
    }
    Ok(1.0 / (1.0 + (-v).exp()))
}

/// `w_max − (w_max − w_min) / I_max × iter`.
pub fn inertia_weight(cfg: &EngineConfig, iter: usize) -> Result<f64, EngineError> {
    if iter > cfg.max_iterations {
        return Err(EngineError::IterationOutOfRange {
            iter,
            max: cfg.max_iterations,
        });
    }
    Ok(cfg.w_max - (cfg.w_max - cfg.w_min) / cfg.max_iterations as f64 * iter as f64)
}

/// Constriction coefficient `2k / |2 − C − sqrt(C(C − 4))|`, `C = C1 + C2`.
pub fn constriction(c1: f64, c2: f64, k: f64) -> Result<f64, EngineError> {
    let c = c1 + c2;
    if c.is_nan() || c < 4.0 {
        return Err(EngineError::ConstrictionDomain(c));
    }
    if !(0.0..=1.0).contains(&k) {
        return Err(EngineError::ConstrictionK(k));
    }
    Ok(2.0 * k / (2.0 - c - (c * (c - 4.0)).sqrt()).abs())
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn check_particle(p: &Particle, g_best: &BinaryPosition) -> Result<usize, EngineError> {
    let n = p.position.len();
    for got in [p.velocity.len(), p.personal_best_position.len(), g_best.len()] {
        if got != n {
            return Err(EngineError::DimensionMismatch { expected: n, got });
        }
    }
    Ok(n)
}

fn finish_velocity(values: Vec<f64>, cfg: &EngineConfig) -> Result<VelocityVector, EngineError> {
    let values = match cfg.velocity_clamp {
        Some(c) => values.into_iter().map(|v| c.clamp(v)).collect(),
        None => values,
    };
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(EngineError::NonFinite(*bad));
    }
    Ok(VelocityVector::new(values))
}

/// Inertia rule. Draws `r1` then `r2` from `rng`.
pub fn velocity_update_v2(
    p: &Particle,
    g_best: &BinaryPosition,
    w: f64,
    rng: &mut RngStream,
    cfg: &EngineConfig,
) -> Result<VelocityVector, EngineError> {
    let n = check_particle(p, g_best)?;
    let phi1 = cfg.c1 * cfg.r_accel_range.sample(rng);
    let phi2 = cfg.c2 * cfg.r_accel_range.sample(rng);
    let v = p.velocity.values();
    let values = (0..n)
        .map(|j| {
            let x = bit(p.position.get(j));
            w * v[j]
                + phi1 * (bit(p.personal_best_position.get(j)) - x)
                + phi2 * (bit(g_best.get(j)) - x)
        })
        .collect();
    finish_velocity(values, cfg)
}

/// Constriction rule. Draws `k` from `rng`.
pub fn velocity_update_v1(
    p: &Particle,
    g_best: &BinaryPosition,
    rng: &mut RngStream,
    cfg: &EngineConfig,
) -> Result<VelocityVector, EngineError> {
    let n = check_particle(p, g_best)?;
    let k = rng.uniform(0.0, 1.0);
    let x = constriction(cfg.big_c1, cfg.big_c2, k)?;
    let v = p.velocity.values();
    let values = (0..n)
        .map(|j| {
            let pos = bit(p.position.get(j));
            x * (v[j]
                + cfg.big_c1 * (bit(p.personal_best_position.get(j)) - pos)
                + cfg.big_c2 * (bit(g_best.get(j)) - pos))
        })
        .collect();
    finish_velocity(values, cfg)
}

/// One threshold draw per coordinate from `r_threshold_range`.
pub fn position_update(
    v: &VelocityVector,
    rng: &mut RngStream,
    cfg: &EngineConfig,
) -> Result<BinaryPosition, EngineError> {
    let mut w = BinaryPosition::zeros(v.len());
    for (j, &vj) in v.values().iter().enumerate() {
        let s = sigmoid(vj)?;
        let r = cfg.r_threshold_range.sample(rng);
        w.set(j, r <= s);
    }
    Ok(w)
}

/// Initial positions and velocities, before evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingSwarm {
    pub positions: Vec<BinaryPosition>,
    pub velocities: Vec<VelocityVector>,
}

/// Each particle picks a ones-fraction from `init_ones_fraction_range`, sets
/// `round(fraction · N)` random coordinates to 1 and draws every velocity
/// coordinate from `[0, 1]`. `streams[i]` is particle `i`'s stream.
pub fn initialize_swarm(
    n: usize,
    cfg: &EngineConfig,
    streams: &mut [RngStream],
) -> Result<PendingSwarm, EngineError> {
    if n == 0 {
        return Err(EngineError::InvalidConfig("instance size must be at least 1".into()));
    }
    cfg.validate()?;
    assert_eq!(streams.len(), cfg.particles, "one stream per particle");
    let mut positions = Vec::with_capacity(cfg.particles);
    let mut velocities = Vec::with_capacity(cfg.particles);
    for rng in streams.iter_mut() {
        let fraction = cfg.init_ones_fraction_range.sample(rng);
        let ones = ((fraction * n as f64).round() as usize).min(n);
        let mut w = BinaryPosition::zeros(n);
        for j in rng.sample_indices(n, ones) {
            w.set(j, true);
        }
        positions.push(w);
        velocities.push(VelocityVector::new((0..n).map(|_| rng.uniform(0.0, 1.0)).collect()));
    }
    Ok(PendingSwarm {
        positions,
        velocities,
    })
}

/// Evaluates a batch of particle positions for one iteration. Reports come
/// back in the order of `words`.
pub trait BatchEvaluator {
    fn evaluate_batch(
        &mut self,
        iteration: usize,
        words: &[(usize, BinaryPosition)],
    ) -> Result<Vec<FitnessReport>, EvalError>;
}

/// Evaluates on the calling thread, one word after another.
pub struct Sequential<E>(pub E);

impl<E: FitnessEvaluator> BatchEvaluator for Sequential<E> {
    fn evaluate_batch(
        &mut self,
        _iteration: usize,
        words: &[(usize, BinaryPosition)],
    ) -> Result<Vec<FitnessReport>, EvalError> {
        words.iter().map(|(_, w)| self.0.evaluate(w)).collect()
    }
}

fn evaluate_all(
    batch: &mut dyn BatchEvaluator,
    iteration: usize,
    positions: &[BinaryPosition],
) -> Result<Vec<FitnessReport>, EngineError> {
    let words: Vec<(usize, BinaryPosition)> = positions.iter().cloned().enumerate().collect();
    let reports = batch.evaluate_batch(iteration, &words)?;
    if reports.len() != words.len() {
        return Err(EngineError::BatchSize {
            expected: words.len(),
            got: reports.len(),
        });
    }
    Ok(reports)
}

impl PendingSwarm {
    /// Evaluates the initial positions (iteration 0) and seeds the bests.
    pub fn evaluate(self, batch: &mut dyn BatchEvaluator) -> Result<SwarmState, EngineError> {
        let reports = evaluate_all(batch, 0, &self.positions)?;
        let particles: Vec<Particle> = self
            .positions
            .into_iter()
            .zip(self.velocities)
            .zip(reports)
            .enumerate()
            .map(|(id, ((position, velocity), report))| Particle {
                id,
                personal_best_position: position.clone(),
                position,
                velocity,
                personal_best_report: report,
            })
            .collect();
        let mut best = &particles[0];
        for p in &particles[1..] {
            if p.personal_best_report.fitness > best.personal_best_report.fitness {
                best = p;
            }
        }
        Ok(SwarmState {
            global_best_position: best.personal_best_position.clone(),
            global_best_report: best.personal_best_report.clone(),
            particles,
            iteration: 0,
        })
    }
}

pub fn should_terminate(state: &SwarmState, cfg: &EngineConfig) -> bool {
    state.global_best_report.fitness >= cfg.target_fitness || state.iteration >= cfg.max_iterations
}

/// One synchronous iteration: move every particle, evaluate the new
/// positions, then refresh personal and global bests. A best is replaced only
/// on strict improvement; particles are scanned in id order.
pub fn step(
    state: &SwarmState,
    batch: &mut dyn BatchEvaluator,
    cfg: &EngineConfig,
    streams: &mut [RngStream],
) -> Result<SwarmState, EngineError> {
    assert_eq!(streams.len(), state.particles.len(), "one stream per particle");
    let w = inertia_weight(cfg, state.iteration)?;
    let mut moved = Vec::with_capacity(state.particles.len());
    for (p, rng) in state.particles.iter().zip(streams.iter_mut()) {
        let velocity = match cfg.variant {
            Variant::VersionII => velocity_update_v2(p, &state.global_best_position, w, rng, cfg)?,
            Variant::VersionI => velocity_update_v1(p, &state.global_best_position, rng, cfg)?,
        };
        let position = position_update(&velocity, rng, cfg)?;
        moved.push((velocity, position));
    }

    let iteration = state.iteration + 1;
    let positions: Vec<BinaryPosition> = moved.iter().map(|(_, x)| x.clone()).collect();
    let reports = evaluate_all(batch, iteration, &positions)?;

    let mut next = SwarmState {
        particles: Vec::with_capacity(moved.len()),
        global_best_position: state.global_best_position.clone(),
        global_best_report: state.global_best_report.clone(),
        iteration,
    };
    for ((old, (velocity, position)), report) in state.particles.iter().zip(moved).zip(reports) {
        let (pbest_pos, pbest_rep) = if report.fitness > old.personal_best_report.fitness {
            (position.clone(), report)
        } else {
            (
                old.personal_best_position.clone(),
                old.personal_best_report.clone(),
            )
        };
        if pbest_rep.fitness > next.global_best_report.fitness {
            next.global_best_position = pbest_pos.clone();
            next.global_best_report = pbest_rep.clone();
        }
        next.particles.push(Particle {
            id: old.id,
            position,
            velocity,
            personal_best_position: pbest_pos,
            personal_best_report: pbest_rep,
        });
    }
    Ok(next)
}

/// Global best after one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub word: BinaryPosition,
    pub report: FitnessReport,
}

impl TracePoint {
    pub fn of(state: &SwarmState) -> Self {
        Self {
            iteration: state.iteration,
            word: state.global_best_position.clone(),
            report: state.global_best_report.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_state: SwarmState,
    /// One point per iteration, starting with the initial swarm (iteration 0).
    pub trace: Vec<TracePoint>,
}

impl RunOutcome {
    pub fn best_word(&self) -> &BinaryPosition {
        &self.final_state.global_best_position
    }

    pub fn best_report(&self) -> &FitnessReport {
        &self.final_state.global_best_report
    }

    pub fn reached_target(&self, cfg: &EngineConfig) -> bool {
        self.best_report().fitness >= cfg.target_fitness
    }
}

/// A swarm bound to its configuration, instance size and random streams.
#[derive(Debug, Clone)]
pub struct Bpso {
    cfg: EngineConfig,
    n: usize,
    streams: Vec<RngStream>,
}

impl Bpso {
    pub fn new(cfg: EngineConfig, n: usize) -> Result<Self, EngineError> {
        cfg.validate()?;
        if n == 0 {
            return Err(EngineError::InvalidConfig("instance size must be at least 1".into()));
        }
        let streams = (0..cfg.particles)
            .map(|i| RngStream::for_particle(cfg.seed, i))
            .collect();
        Ok(Self { cfg, n, streams })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn instance_size(&self) -> usize {
        self.n
    }

    pub fn run(&mut self, batch: &mut dyn BatchEvaluator) -> Result<RunOutcome, EngineError> {
        self.run_with(batch, |_| {})
    }

    /// Runs to termination, calling `on_iteration` after every evaluated
    /// iteration (including the initial one).
    /// Draws the initial swarm and evaluates it (iteration 0).
    pub fn initialize(&mut self, batch: &mut dyn BatchEvaluator) -> Result<SwarmState, EngineError> {
        initialize_swarm(self.n, &self.cfg, &mut self.streams)?.evaluate(batch)
    }

    /// One iteration from `state`.
    pub fn advance(
        &mut self,
        state: &SwarmState,
        batch: &mut dyn BatchEvaluator,
    ) -> Result<SwarmState, EngineError> {
        step(state, batch, &self.cfg, &mut self.streams)
    }

    pub fn run_with(
        &mut self,
        batch: &mut dyn BatchEvaluator,
        mut on_iteration: impl FnMut(&SwarmState),
    ) -> Result<RunOutcome, EngineError> {
        let mut state = self.initialize(batch)?;
        let mut trace = vec![TracePoint::of(&state)];
        on_iteration(&state);
        while !should_terminate(&state, &self.cfg) {
            state = self.advance(&state, batch)?;
            trace.push(TracePoint::of(&state));
            on_iteration(&state);
        }
        Ok(RunOutcome {
            final_state: state,
            trace,
        })
    }
}

/// Convenience: a full run with sequential evaluation.
pub fn run_bpso(
    cfg: &EngineConfig,
    ev: &dyn FitnessEvaluator,
) -> Result<RunOutcome, EngineError> {
    Bpso::new(cfg.clone(), ev.instance_size())?.run(&mut Sequential(ev))
}
