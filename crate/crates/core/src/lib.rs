//! Subset selection over binary words with particle swarm and genetic
//! optimizers.
//!
//! An instance is a list of `N` items (genes). A subset is a
//! [`BinaryPosition`]; an evaluator scores a subset with a lowest-support
//! value `b` and an inclusion measure `p`, and the fitness is `(b + p) / 2`.
//! The optimizers search `{0,1}^N` for the word of highest fitness.
//!
//! Modules:
//! - [`bits`]: positions, velocities, particles and fitness reports.
//! - [`engine`]: binary PSO in two variants (inertia and constriction).
//! - [`fitness`]: the evaluator trait, a planted-optimum oracle and a memo cache.
//! - [`phylo`]: FASTA + partition loading, neighbor joining, bootstrap supports.
//! - [`ga`]: the three-stage baseline pipeline (systematic, random, genetic).
//! - [`runtime`]: master/worker evaluation over a framed text protocol.
//! - [`report`]: topology, per-swarm and method-comparison tables.
//! - [`config`]: the flat `key = value` run configuration.

pub mod bits;
pub mod config;
pub mod engine;
pub mod fitness;
pub mod ga;
pub mod phylo;
pub mod report;
pub mod rng;
pub mod runtime;

pub use bits::{
    combine_fitness, ones_count, percentage_ones, BinaryPosition, BitsError, FitnessReport,
    PMode, Particle, SwarmState, TopologyId, VelocityVector,
};
pub use engine::{EngineConfig, Interval, Variant};
pub use fitness::{EvalError, FitnessEvaluator, MemoCache, Memoized, PlantedOracle};
pub use rng::RngStream;
