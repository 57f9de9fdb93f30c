//! Run configuration: flat `key = value` text.
//!
//! ```text
//! # comment
//! engine.L = 10
//! engine.r_threshold_range = [0.1, 0.5]
//! fitness.evaluator = phylo
//! phylo.fasta = data/core.fasta
//! ```
//!
//! Keys carry a section prefix (`engine.`, `fitness.`, `phylo.`, `ga.`,
//! `runtime.`, `report.`). Engine keys are the [`EngineConfig`] field names
//! (`L` for the particle count, `I_max` for the iteration cap). Unknown keys
//! are rejected. [`RunConfig::to_text`] writes every key and parses back to
//! an equal config.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::bits::{BinaryPosition, PMode};
use crate::engine::{EngineConfig, Interval, Variant};
use crate::ga::PipelineConfig;
use crate::phylo::GapMode;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaluatorKind {
    Planted,
    Phylo,
}

impl FromStr for EvaluatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "planted" => Ok(Self::Planted),
            "phylo" => Ok(Self::Phylo),
            _ => Err("expected planted|phylo".into()),
        }
    }
}

impl fmt::Display for EvaluatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Planted => "planted",
            Self::Phylo => "phylo",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bpso1,
    Bpso2,
    Ga,
}

impl Method {
    pub fn variant(self) -> Option<Variant> {
        match self {
            Method::Bpso1 => Some(Variant::VersionI),
            Method::Bpso2 => Some(Variant::VersionII),
            Method::Ga => None,
        }
    }

    pub fn from_variant(v: Variant) -> Self {
        match v {
            Variant::VersionI => Method::Bpso1,
            Variant::VersionII => Method::Bpso2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bpso1 => "bpso1",
            Method::Bpso2 => "bpso2",
            Method::Ga => "ga",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bpso1" => Ok(Method::Bpso1),
            "bpso2" => Ok(Method::Bpso2),
            "ga" => Ok(Method::Ga),
            _ => Err("expected bpso1|bpso2|ga".into()),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    Local,
    Tcp,
}

impl FromStr for TransportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(Self::Local),
            "tcp" => Ok(Self::Tcp),
            _ => Err("expected local|tcp".into()),
        }
    }
}

impl fmt::Display for TransportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Local => "local",
            Self::Tcp => "tcp",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitnessConfig {
    pub evaluator: EvaluatorKind,
    /// Planted optimum for the oracle evaluator.
    pub planted: Option<BinaryPosition>,
    pub noise: f64,
    pub noise_seed: u64,
    pub p_mode: PMode,
    /// Memo cache file, loaded before and saved after a run.
    pub cache: Option<PathBuf>,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        Self {
            evaluator: EvaluatorKind::Phylo,
            planted: None,
            noise: 0.0,
            noise_seed: 0,
            p_mode: PMode::Percent,
            cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhyloConfig {
    pub fasta: Option<PathBuf>,
    pub partitions: Option<PathBuf>,
    pub outgroup: Option<String>,
    pub replicates: usize,
    pub seed: u64,
    pub gap_mode: GapMode,
    pub external_command: Option<String>,
}

impl Default for PhyloConfig {
    fn default() -> Self {
        Self {
            fasta: None,
            partitions: None,
            outgroup: None,
            replicates: 100,
            seed: 1,
            gap_mode: GapMode::Pairwise,
            external_command: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeConfig {
    pub method: Method,
    pub swarms: usize,
    pub reps: usize,
    pub transport: TransportKind,
    pub port: u16,
    pub workers: usize,
    /// With TCP: start the workers as local threads instead of waiting for
    /// `serve-worker` processes.
    pub spawn_workers: bool,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            method: Method::Bpso2,
            swarms: 1,
            reps: 1,
            transport: TransportKind::Local,
            port: 7878,
            workers: 1,
            spawn_workers: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    pub output_dir: PathBuf,
    pub instance: String,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            instance: "instance".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub engine: EngineConfig,
    pub fitness: FitnessConfig,
    pub phylo: PhyloConfig,
    pub ga: PipelineConfig,
    pub runtime: RuntimeConfig,
    pub report: ReportConfig,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::BadValue {
        key: key.to_owned(),
        value: value.to_owned(),
        reason: e.to_string(),
    })
}

fn optional(value: &str) -> Option<&str> {
    match value {
        "" | "none" => None,
        v => Some(v),
    }
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    optional(value).map(|v| parse(key, v)).transpose()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
            reason: "expected true|false".into(),
        }),
    }
}

fn parse_pair(key: &str, value: &str) -> Result<(usize, usize), ConfigError> {
    let iv: Interval = parse(key, value)?;
    let as_int = |x: f64| {
        (x >= 0.0 && x.fract() == 0.0)
            .then_some(x as usize)
            .ok_or_else(|| ConfigError::BadValue {
                key: key.into(),
                value: value.into(),
                reason: "expected non-negative integers".into(),
            })
    };
    Ok((as_int(iv.lo)?, as_int(iv.hi)?))
}

fn show_opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_owned(), T::to_string)
}

fn gap_mode_str(g: GapMode) -> &'static str {
    match g {
        GapMode::Pairwise => "pairwise",
        GapMode::Complete => "complete",
    }
}

impl RunConfig {
    /// Every accepted key, in the order [`RunConfig::to_text`] writes them.
    pub const KEYS: &'static [&'static str] = &[
        "engine.variant",
        "engine.L",
        "engine.I_max",
        "engine.c1",
        "engine.c2",
        "engine.C1",
        "engine.C2",
        "engine.w_max",
        "engine.w_min",
        "engine.r_accel_range",
        "engine.r_threshold_range",
        "engine.target_fitness",
        "engine.init_ones_fraction_range",
        "engine.velocity_clamp",
        "engine.seed",
        "fitness.evaluator",
        "fitness.planted",
        "fitness.noise",
        "fitness.noise_seed",
        "fitness.p_mode",
        "fitness.cache",
        "phylo.fasta",
        "phylo.partitions",
        "phylo.outgroup",
        "phylo.replicates",
        "phylo.seed",
        "phylo.gap_mode",
        "phylo.external_command",
        "ga.systematic_budget",
        "ga.random_budget",
        "ga.ga_budget",
        "ga.random_removal_range",
        "ga.population",
        "ga.generations",
        "ga.crossover_rate",
        "ga.mutation_rate",
        "ga.tournament",
        "ga.elitism",
        "ga.target_fitness",
        "ga.seed",
        "runtime.method",
        "runtime.swarms",
        "runtime.reps",
        "runtime.transport",
        "runtime.port",
        "runtime.workers",
        "runtime.spawn_workers",
        "report.output_dir",
        "report.instance",
    ];

    /// Parses config text on top of the defaults and validates the result.
    pub fn parse_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies every `key = value` line of `text`; does not validate.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_owned(),
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            text: kv.to_owned(),
        })?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let e = &mut self.engine;
        match key {
            "engine.variant" => e.variant = parse(key, value)?,
            "engine.L" => e.particles = parse(key, value)?,
            "engine.I_max" => e.max_iterations = parse(key, value)?,
            "engine.c1" => e.c1 = parse(key, value)?,
            "engine.c2" => e.c2 = parse(key, value)?,
            "engine.C1" => e.big_c1 = parse(key, value)?,
            "engine.C2" => e.big_c2 = parse(key, value)?,
            "engine.w_max" => e.w_max = parse(key, value)?,
            "engine.w_min" => e.w_min = parse(key, value)?,
            "engine.r_accel_range" => e.r_accel_range = parse(key, value)?,
            "engine.r_threshold_range" => e.r_threshold_range = parse(key, value)?,
            "engine.target_fitness" => e.target_fitness = parse(key, value)?,
            "engine.init_ones_fraction_range" => e.init_ones_fraction_range = parse(key, value)?,
            "engine.velocity_clamp" => e.velocity_clamp = parse_opt(key, value)?,
            "engine.seed" => e.seed = parse(key, value)?,
            "fitness.evaluator" => self.fitness.evaluator = parse(key, value)?,
            "fitness.planted" => self.fitness.planted = parse_opt(key, value)?,
            "fitness.noise" => self.fitness.noise = parse(key, value)?,
            "fitness.noise_seed" => self.fitness.noise_seed = parse(key, value)?,
            "fitness.p_mode" => self.fitness.p_mode = parse(key, value)?,
            "fitness.cache" => self.fitness.cache = optional(value).map(PathBuf::from),
            "phylo.fasta" => self.phylo.fasta = optional(value).map(PathBuf::from),
            "phylo.partitions" => self.phylo.partitions = optional(value).map(PathBuf::from),
            "phylo.outgroup" => self.phylo.outgroup = optional(value).map(str::to_owned),
            "phylo.replicates" => self.phylo.replicates = parse(key, value)?,
            "phylo.seed" => self.phylo.seed = parse(key, value)?,
            "phylo.gap_mode" => {
                self.phylo.gap_mode = match value {
                    "pairwise" => GapMode::Pairwise,
                    "complete" => GapMode::Complete,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            value: value.into(),
                            reason: "expected pairwise|complete".into(),
                        })
                    }
                }
            }
            "phylo.external_command" => {
                self.phylo.external_command = optional(value).map(str::to_owned)
            }
            "ga.systematic_budget" => self.ga.stage_budget.systematic = parse_opt(key, value)?,
            "ga.random_budget" => self.ga.stage_budget.random = parse(key, value)?,
            "ga.ga_budget" => self.ga.stage_budget.ga = parse_opt(key, value)?,
            "ga.random_removal_range" => self.ga.random_removal_range = parse_pair(key, value)?,
            "ga.population" => self.ga.ga.population = parse(key, value)?,
            "ga.generations" => self.ga.ga.generations = parse(key, value)?,
            "ga.crossover_rate" => self.ga.ga.crossover_rate = parse(key, value)?,
            "ga.mutation_rate" => {
                self.ga.ga.mutation_rate = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "ga.tournament" => self.ga.ga.tournament = parse(key, value)?,
            "ga.elitism" => self.ga.ga.elitism = parse(key, value)?,
            "ga.target_fitness" => self.ga.target_fitness = parse(key, value)?,
            "ga.seed" => self.ga.seed = parse(key, value)?,
            "runtime.method" => {
                let m: Method = parse(key, value)?;
                if let Some(v) = m.variant() {
                    self.engine.variant = v;
                }
                self.runtime.method = m;
            }
            "runtime.swarms" => self.runtime.swarms = parse(key, value)?,
            "runtime.reps" => self.runtime.reps = parse(key, value)?,
            "runtime.transport" => self.runtime.transport = parse(key, value)?,
            "runtime.port" => self.runtime.port = parse(key, value)?,
            "runtime.workers" => self.runtime.workers = parse(key, value)?,
            "runtime.spawn_workers" => self.runtime.spawn_workers = parse_bool(key, value)?,
            "report.output_dir" => self.report.output_dir = PathBuf::from(value),
            "report.instance" => self.report.instance = value.to_owned(),
            other => return Err(ConfigError::UnknownKey(other.to_owned())),
        }
        if key == "engine.variant" && self.runtime.method != Method::Ga {
            self.runtime.method = Method::from_variant(self.engine.variant);
        }
        Ok(())
    }

    /// Checks everything that does not depend on the instance size.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.engine
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let r = &self.runtime;
        if r.swarms == 0 || r.reps == 0 || r.workers == 0 {
            return Err(ConfigError::Invalid(
                "runtime.swarms, runtime.reps and runtime.workers must be positive".into(),
            ));
        }
        if self.phylo.replicates == 0 {
            return Err(ConfigError::Invalid("phylo.replicates must be positive".into()));
        }
        if self.fitness.noise.is_nan() || self.fitness.noise < 0.0 {
            return Err(ConfigError::Invalid("fitness.noise must be non-negative".into()));
        }
        if self.fitness.evaluator == EvaluatorKind::Planted && self.fitness.planted.is_none() {
            return Err(ConfigError::Invalid(
                "fitness.evaluator = planted needs fitness.planted".into(),
            ));
        }
        if self.fitness.evaluator == EvaluatorKind::Phylo
            && (self.phylo.fasta.is_none() || self.phylo.partitions.is_none())
        {
            return Err(ConfigError::Invalid(
                "fitness.evaluator = phylo needs phylo.fasta and phylo.partitions".into(),
            ));
        }
        Ok(())
    }

    /// Every key with its current value, one `key = value` line each.
    pub fn to_text(&self) -> String {
        let e = &self.engine;
        let g = &self.ga;
        let values: Vec<String> = vec![
            e.variant.to_string(),
            e.particles.to_string(),
            e.max_iterations.to_string(),
            e.c1.to_string(),
            e.c2.to_string(),
            e.big_c1.to_string(),
            e.big_c2.to_string(),
            e.w_max.to_string(),
            e.w_min.to_string(),
            e.r_accel_range.to_string(),
            e.r_threshold_range.to_string(),
            e.target_fitness.to_string(),
            e.init_ones_fraction_range.to_string(),
            show_opt(&e.velocity_clamp),
            e.seed.to_string(),
            self.fitness.evaluator.to_string(),
            show_opt(&self.fitness.planted),
            self.fitness.noise.to_string(),
            self.fitness.noise_seed.to_string(),
            self.fitness.p_mode.to_string(),
            show_opt(&self.fitness.cache.as_ref().map(|p| p.display().to_string())),
            show_opt(&self.phylo.fasta.as_ref().map(|p| p.display().to_string())),
            show_opt(&self.phylo.partitions.as_ref().map(|p| p.display().to_string())),
            show_opt(&self.phylo.outgroup),
            self.phylo.replicates.to_string(),
            self.phylo.seed.to_string(),
            gap_mode_str(self.phylo.gap_mode).to_owned(),
            show_opt(&self.phylo.external_command),
            show_opt(&g.stage_budget.systematic),
            g.stage_budget.random.to_string(),
            show_opt(&g.stage_budget.ga),
            format!("{},{}", g.random_removal_range.0, g.random_removal_range.1),
            g.ga.population.to_string(),
            g.ga.generations.to_string(),
            g.ga.crossover_rate.to_string(),
            g.ga.mutation_rate.map_or_else(|| "auto".to_owned(), |m| m.to_string()),
            g.ga.tournament.to_string(),
            g.ga.elitism.to_string(),
            g.target_fitness.to_string(),
            g.seed.to_string(),
            self.runtime.method.to_string(),
            self.runtime.swarms.to_string(),
            self.runtime.reps.to_string(),
            self.runtime.transport.to_string(),
            self.runtime.port.to_string(),
            self.runtime.workers.to_string(),
            self.runtime.spawn_workers.to_string(),
            self.report.output_dir.display().to_string(),
            self.report.instance.clone(),
        ];
        Self::KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
