//! Configuration loading and evaluator construction.

use std::fs;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use phyloswarm::config::{EvaluatorKind, RunConfig};
use phyloswarm::fitness::{FitnessEvaluator, MemoCache, Memoized, PlantedOracle};
use phyloswarm::phylo::{load_gene_matrix, ExternalCommand, GeneMatrix, PhyloEvaluator, PhyloSettings};

use crate::{ConfigArgs, Failure};

/// File, then `--set` overrides in order, then `--seed`; validated last.
pub fn load_config(args: &ConfigArgs, extra: &[(&str, String)]) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))
            .map_err(Failure::Config)?;
        cfg.apply_text(&text)
            .with_context(|| format!("config {}", path.display()))
            .map_err(Failure::Config)?;
    }
    for kv in &args.overrides {
        cfg.apply_override(kv)
            .with_context(|| format!("--set {kv}"))
            .map_err(Failure::Config)?;
    }
    let mut set = |key: &str, value: &str| {
        cfg.set(key, value)
            .with_context(|| format!("{key} = {value}"))
            .map_err(Failure::Config)
    };
    if let Some(seed) = args.seed {
        set("engine.seed", &seed.to_string())?;
        set("ga.seed", &seed.to_string())?;
    }
    for (key, value) in extra {
        set(key, value)?;
    }
    cfg.validate().map_err(|e| Failure::Config(e.into()))?;
    Ok(cfg)
}

/// The configured evaluator, plus the gene matrix when it is phylogenetic.
pub struct Instance {
    pub evaluator: Arc<dyn FitnessEvaluator>,
    pub phylo: Option<PhyloEvaluator>,
    pub cache: Option<Arc<MemoCache>>,
}

impl Instance {
    pub fn size(&self) -> usize {
        self.evaluator.instance_size()
    }

    pub fn gene_names(&self) -> Option<Vec<String>> {
        self.phylo
            .as_ref()
            .map(|p| p.matrix().gene_names().into_iter().map(str::to_owned).collect())
    }
}

pub fn load_matrix(cfg: &RunConfig) -> Result<GeneMatrix, Failure> {
    let (Some(fasta), Some(parts)) = (&cfg.phylo.fasta, &cfg.phylo.partitions) else {
        return Err(Failure::Config(anyhow!("phylo.fasta and phylo.partitions are required")));
    };
    load_gene_matrix(fasta, parts, cfg.phylo.outgroup.as_deref())
        .map_err(|e| Failure::Input(anyhow!(e).context("cannot load gene matrix")))
}

pub fn build_instance(cfg: &RunConfig) -> Result<Instance, Failure> {
    let (base, phylo): (Arc<dyn FitnessEvaluator>, Option<PhyloEvaluator>) = match cfg.fitness.evaluator {
        EvaluatorKind::Planted => {
            let planted = cfg
                .fitness
                .planted
                .clone()
                .ok_or_else(|| Failure::Config(anyhow!("fitness.planted is required")))?;
            let oracle = PlantedOracle::new(planted)
                .with_noise(cfg.fitness.noise, cfg.fitness.noise_seed)
                .with_p_mode(cfg.fitness.p_mode);
            (Arc::new(oracle), None)
        }
        EvaluatorKind::Phylo => {
            let matrix = Arc::new(load_matrix(cfg)?);
            let settings = PhyloSettings {
                replicates: cfg.phylo.replicates,
                seed: cfg.phylo.seed,
                p_mode: cfg.fitness.p_mode,
                gap_mode: cfg.phylo.gap_mode,
            };
            let mut ev = PhyloEvaluator::new(matrix, settings);
            if let Some(command) = &cfg.phylo.external_command {
                ev = ev.with_external(ExternalCommand {
                    command: command.clone(),
                });
            }
            (Arc::new(ev.clone()), Some(ev))
        }
    };
    let Some(path) = &cfg.fitness.cache else {
        return Ok(Instance {
            evaluator: base,
            phylo,
            cache: None,
        });
    };
    let cache = if path.exists() {
        MemoCache::load(path)
            .map_err(|e| Failure::Input(anyhow!(e).context(format!("cannot load cache {}", path.display()))))?
    } else {
        MemoCache::new()
    };
    let cache = Arc::new(cache);
    Ok(Instance {
        evaluator: Arc::new(Memoized::with_cache(base, Arc::clone(&cache))),
        phylo,
        cache: Some(cache),
    })
}

pub fn save_cache(cfg: &RunConfig, instance: &Instance) -> Result<(), Failure> {
    if let (Some(path), Some(cache)) = (&cfg.fitness.cache, &instance.cache) {
        cache
            .save(path)
            .with_context(|| format!("cannot write cache {}", path.display()))?;
    }
    Ok(())
}
