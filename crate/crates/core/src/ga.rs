//! Three-stage baseline: systematic deletion of 0 or 1 item, random
//! suppression of a few items, then a generational genetic algorithm.
//! Each stage starts from the previous stage's incumbent, and the pipeline
//! stops at the first stage that reaches the target fitness.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::bits::{BinaryPosition, FitnessReport};
use crate::fitness::{EvalError, FitnessEvaluator, MemoCache, Memoized};
use crate::rng::RngStream;

#[derive(Debug, Error)]
pub enum GaError {
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaSettings {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-bit flip probability; `None` means `1/N`.
    pub mutation_rate: Option<f64>,
    pub tournament: usize,
    pub elitism: usize,
}

impl Default for GaSettings {
    fn default() -> Self {
        Self {
            population: 30,
            generations: 200,
            crossover_rate: 0.9,
            mutation_rate: None,
            tournament: 3,
            elitism: 1,
        }
    }
}

/// Evaluation caps per stage. `None` means uncapped.
#[derive(Debug, Clone, PartialEq)]
pub struct StageBudget {
    pub systematic: Option<usize>,
    pub random: usize,
    pub ga: Option<usize>,
}

impl Default for StageBudget {
    fn default() -> Self {
        Self {
            systematic: None,
            random: 100,
            ga: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub stage_budget: StageBudget,
    /// Inclusive range of how many items the random stage removes.
    pub random_removal_range: (usize, usize),
    pub ga: GaSettings,
    pub target_fitness: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stage_budget: StageBudget::default(),
            random_removal_range: (2, 5),
            ga: GaSettings::default(),
            target_fitness: 95.0,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self, n: usize) -> Result<(), GaError> {
        let bad = |m: String| Err(GaError::InvalidConfig(m));
        let (lo, hi) = self.random_removal_range;
        if lo > hi {
            return bad(format!("random_removal_range [{lo}, {hi}] is not ordered"));
        }
        if self.stage_budget.random > 0 && (lo < 2 || hi + 1 > n) {
            return bad(format!(
                "random_removal_range [{lo}, {hi}] must lie within [2, {}]",
                n.saturating_sub(1)
            ));
        }
        let g = &self.ga;
        if g.population < 2 {
            return bad("ga population must be at least 2".into());
        }
        if g.tournament == 0 {
            return bad("ga tournament size must be positive".into());
        }
        if g.elitism > g.population {
            return bad("ga elitism exceeds population".into());
        }
        if !(0.0..=1.0).contains(&g.crossover_rate) {
            return bad("ga crossover rate must lie in [0, 1]".into());
        }
        if let Some(m) = g.mutation_rate {
            if !(0.0..=1.0).contains(&m) {
                return bad("ga mutation rate must lie in [0, 1]".into());
            }
        }
        Ok(())
    }
}

/// Best word of a stage plus everything the stage evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct StageResult {
    pub word: BinaryPosition,
    pub report: FitnessReport,
    pub evaluated: Vec<BinaryPosition>,
}

impl StageResult {
    pub fn evaluations(&self) -> usize {
        self.evaluated.len()
    }

    fn consider(&mut self, w: BinaryPosition, r: FitnessReport) {
        if r.fitness > self.report.fitness {
            self.word = w.clone();
            self.report = r;
        }
        self.evaluated.push(w);
    }
}

/// All-ones plus every single-deletion word (`N + 1` evaluations). Ties go to
/// fewer deletions, then to the lower word.
pub fn systematic_stage(
    ev: &dyn FitnessEvaluator,
    n: usize,
    cfg: &PipelineConfig,
) -> Result<StageResult, GaError> {
    let mut words = vec![BinaryPosition::ones(n)];
    for j in 0..n {
        let mut w = BinaryPosition::ones(n);
        w.set(j, false);
        words.push(w);
    }
    if let Some(cap) = cfg.stage_budget.systematic {
        words.truncate(cap.max(1));
    }
    let reports: Vec<FitnessReport> = words
        .par_iter()
        .map(|w| ev.evaluate(w))
        .collect::<Result<_, _>>()?;
    let mut best = 0;
    for i in 1..words.len() {
        let (a, b) = (&reports[i], &reports[best]);
        let better = a.fitness > b.fitness
            || (a.fitness == b.fitness
                && (words[i].ones_count() > words[best].ones_count()
                    || (words[i].ones_count() == words[best].ones_count() && words[i] < words[best])));
        if better {
            best = i;
        }
    }
    Ok(StageResult {
        word: words[best].clone(),
        report: reports[best].clone(),
        evaluated: words,
    })
}

/// Removes a uniformly drawn number of items (from `random_removal_range`)
/// at uniformly chosen positions of the all-ones word, until the budget is
/// spent or the target is reached. Returns `incumbent` improved in place.
pub fn random_stage(
    ev: &dyn FitnessEvaluator,
    n: usize,
    cfg: &PipelineConfig,
    rng: &mut RngStream,
    incumbent: &StageResult,
) -> Result<StageResult, GaError> {
    let mut out = StageResult {
        word: incumbent.word.clone(),
        report: incumbent.report.clone(),
        evaluated: Vec::new(),
    };
    if cfg.stage_budget.random == 0 {
        return Ok(out);
    }
    cfg.validate(n)?;
    let (lo, hi) = cfg.random_removal_range;
    for _ in 0..cfg.stage_budget.random {
        if out.report.fitness >= cfg.target_fitness {
            break;
        }
        let k = rng.range_inclusive(lo, hi);
        let mut w = BinaryPosition::ones(n);
        for j in rng.sample_indices(n, k) {
            w.set(j, false);
        }
        let r = ev.evaluate(&w)?;
        out.consider(w, r);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub stage: StageResult,
    /// Best fitness after each generation, starting with the initial one.
    pub best_trace: Vec<f64>,
}

fn tournament(fitness: &[f64], size: usize, rng: &mut RngStream) -> usize {
    let mut best = rng.below(fitness.len());
    for _ in 1..size {
        let c = rng.below(fitness.len());
        if fitness[c] > fitness[best] || (fitness[c] == fitness[best] && c < best) {
            best = c;
        }
    }
    best
}

/// Generational GA: tournament selection, uniform crossover, per-bit flip
/// mutation and elitism. `seeds` enter the initial population first; the
/// rest is random with a ones-fraction drawn from `[0.5, 1]`.
pub fn ga_stage(
    ev: &dyn FitnessEvaluator,
    n: usize,
    cfg: &PipelineConfig,
    rng: &mut RngStream,
    seeds: &[BinaryPosition],
) -> Result<GaOutcome, GaError> {
    cfg.validate(n)?;
    let g = &cfg.ga;
    let mutation = g.mutation_rate.unwrap_or(1.0 / n as f64);
    let budget = cfg.stage_budget.ga.unwrap_or(usize::MAX);

    let mut population: Vec<BinaryPosition> = seeds.iter().take(g.population).cloned().collect();
    while population.len() < g.population {
        let fraction = rng.uniform(0.5, 1.0);
        let mut w = BinaryPosition::zeros(n);
        for j in 0..n {
            w.set(j, rng.chance(fraction));
        }
        population.push(w);
    }

    let evaluate = |pop: &[BinaryPosition]| -> Result<Vec<FitnessReport>, EvalError> {
        pop.par_iter().map(|w| ev.evaluate(w)).collect()
    };

    let mut stage = StageResult {
        word: population[0].clone(),
        report: FitnessReport {
            fitness: f64::NEG_INFINITY,
            ..FitnessReport::zero()
        },
        evaluated: Vec::new(),
    };
    if budget < population.len() {
        return Err(GaError::InvalidConfig(format!(
            "ga budget {budget} cannot cover one population of {}",
            population.len()
        )));
    }
    let mut reports = evaluate(&population)?;
    for (w, r) in population.iter().zip(&reports) {
        stage.consider(w.clone(), r.clone());
    }
    let mut best_trace = vec![stage.report.fitness];

    for _ in 0..g.generations {
        if stage.report.fitness >= cfg.target_fitness
            || stage.evaluations() + g.population > budget
        {
            break;
        }
        let fitness: Vec<f64> = reports.iter().map(|r| r.fitness).collect();
        let mut ranked: Vec<usize> = (0..population.len()).collect();
        ranked.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));

        let mut next: Vec<BinaryPosition> = ranked[..g.elitism]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        while next.len() < g.population {
            let a = &population[tournament(&fitness, g.tournament, rng)];
            let b = &population[tournament(&fitness, g.tournament, rng)];
            let (mut c, mut d) = (a.clone(), b.clone());
            if rng.chance(g.crossover_rate) {
                for j in 0..n {
                    if rng.chance(0.5) {
                        c.set(j, b.get(j));
                        d.set(j, a.get(j));
                    }
                }
            }
            for child in [&mut c, &mut d] {
                for j in 0..n {
                    if rng.chance(mutation) {
                        child.flip(j);
                    }
                }
            }
            next.push(c);
            if next.len() < g.population {
                next.push(d);
            }
        }
        population = next;
        reports = evaluate(&population)?;
        for (w, r) in population.iter().zip(&reports) {
            stage.consider(w.clone(), r.clone());
        }
        best_trace.push(stage.report.fitness);
    }
    Ok(GaOutcome { stage, best_trace })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    /// Stage at which the run stopped: 1 systematic, 2 random, 3 genetic.
    pub terminus: u8,
    pub best_word: BinaryPosition,
    pub best_report: FitnessReport,
    /// Evaluation requests per stage.
    pub stage_evaluations: [usize; 3],
    /// Total evaluation requests.
    pub evaluations: usize,
    /// Distinct words evaluated (memo-cache misses).
    pub unique_words: usize,
    pub ga_trace: Vec<f64>,
}

/// Stages 1 → 2 → 3 over a memoized view of `ev`, stopping as soon as the
/// incumbent reaches `target_fitness`.
pub fn run_pipeline(
    ev: &dyn FitnessEvaluator,
    n: usize,
    cfg: &PipelineConfig,
) -> Result<PipelineResult, GaError> {
    run_pipeline_with_cache(ev, n, cfg, Arc::new(MemoCache::new()))
}

pub fn run_pipeline_with_cache(
    ev: &dyn FitnessEvaluator,
    n: usize,
    cfg: &PipelineConfig,
    cache: Arc<MemoCache>,
) -> Result<PipelineResult, GaError> {
    cfg.validate(n)?;
    let misses_before = cache.misses();
    let memo = Memoized::with_cache(ev, cache);
    let mut rng = RngStream::master(cfg.seed);
    let mut counts = [0usize; 3];

    let done = |s: &StageResult| s.report.fitness >= cfg.target_fitness;
    let finish = |terminus: u8, s: StageResult, counts: [usize; 3], trace: Vec<f64>| PipelineResult {
        terminus,
        best_word: s.word,
        best_report: s.report,
        stage_evaluations: counts,
        evaluations: counts.iter().sum(),
        unique_words: memo.cache().misses() - misses_before,
        ga_trace: trace,
    };

    let s1 = systematic_stage(&memo, n, cfg)?;
    counts[0] = s1.evaluations();
    if done(&s1) {
        return Ok(finish(1, s1, counts, Vec::new()));
    }
    let s2 = random_stage(&memo, n, cfg, &mut rng, &s1)?;
    counts[1] = s2.evaluations();
    if done(&s2) {
        return Ok(finish(2, s2, counts, Vec::new()));
    }
    let ga = ga_stage(&memo, n, cfg, &mut rng, std::slice::from_ref(&s2.word))?;
    counts[2] = ga.stage.evaluations();
    let mut s3 = ga.stage;
    if s2.report.fitness >= s3.report.fitness {
        s3.word = s2.word;
        s3.report = s2.report;
    }
    Ok(finish(3, s3, counts, ga.best_trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::{brute_force_optimum, ConstantEvaluator, Counting, PlantedOracle};

    fn cfg() -> PipelineConfig {
        PipelineConfig::default()
    }

    #[test]
    fn systematic_evaluates_n_plus_one() {
        let ev = Counting::new(PlantedOracle::new(BinaryPosition::ones(5)));
        let s = systematic_stage(&ev, 5, &cfg()).unwrap();
        assert_eq!(ev.calls(), 6);
        assert_eq!(s.evaluations(), 6);
        assert_eq!(s.word, BinaryPosition::ones(5));
    }

    #[test]
    fn systematic_ties_prefer_fewer_deletions_then_lower_word() {
        let ev = ConstantEvaluator {
            n: 4,
            report: FitnessReport::new(50.0, 50.0, None).unwrap(),
        };
        let s = systematic_stage(&ev, 4, &cfg()).unwrap();
        assert_eq!(s.word, BinaryPosition::ones(4));

        // planted 1011: deleting gene 1 is optimal
        let ev = PlantedOracle::new("1011".parse().unwrap());
        let s = systematic_stage(&ev, 4, &cfg()).unwrap();
        // 1111 and 1011 tie on fitness (b−25, p+25); fewer deletions wins
        assert_eq!(s.word.to_string(), "1111");
    }

    #[test]
    fn random_stage_respects_removal_range() {
        let n = 20;
        let ev = PlantedOracle::new(BinaryPosition::ones(n));
        let inc = systematic_stage(&ev, n, &cfg()).unwrap();
        let c = PipelineConfig {
            target_fitness: 101.0,
            ..cfg()
        };
        let out = random_stage(&ev, n, &c, &mut RngStream::master(3), &inc).unwrap();
        assert_eq!(out.evaluations(), 100);
        for w in &out.evaluated {
            let ones = w.ones_count();
            assert!((n - 5..=n - 2).contains(&ones), "{ones}");
        }
        let again = random_stage(&ev, n, &c, &mut RngStream::master(3), &inc).unwrap();
        assert_eq!(again.evaluated, out.evaluated);
    }

    #[test]
    fn random_stage_zero_budget_keeps_incumbent() {
        let ev = PlantedOracle::new("110101".parse().unwrap());
        let inc = systematic_stage(&ev, 6, &cfg()).unwrap();
        let mut c = cfg();
        c.stage_budget.random = 0;
        let out = random_stage(&ev, 6, &c, &mut RngStream::master(0), &inc).unwrap();
        assert_eq!((out.word, out.report), (inc.word, inc.report));
        assert!(out.evaluated.is_empty());
    }

    #[test]
    fn ga_fixed_point_without_variation() {
        let ev = PlantedOracle::new("1100110011".parse().unwrap()).with_noise(5.0, 1);
        let c = PipelineConfig {
            ga: GaSettings {
                population: 8,
                generations: 10,
                crossover_rate: 0.0,
                mutation_rate: Some(0.0),
                elitism: 8,
                ..GaSettings::default()
            },
            target_fitness: 101.0,
            ..cfg()
        };
        let out = ga_stage(&ev, 10, &c, &mut RngStream::master(5), &[]).unwrap();
        assert_eq!(out.best_trace.len(), 11);
        assert!(out.best_trace.windows(2).all(|w| w[0] == w[1]));
        // the same 8 words every generation
        let first: Vec<_> = out.stage.evaluated[..8].to_vec();
        for gen in out.stage.evaluated.chunks(8) {
            let mut a = gen.to_vec();
            let mut b = first.clone();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ga_elitist_trace_is_monotone_and_finds_optimum() {
        let planted: BinaryPosition = "1011011100101101".parse().unwrap();
        let ev = PlantedOracle::new(planted).with_noise(2.0, 8);
        let (_, opt) = brute_force_optimum(&ev).unwrap();
        let c = PipelineConfig {
            target_fitness: 101.0,
            ..cfg()
        };
        let out = ga_stage(&ev, 16, &c, &mut RngStream::master(21), &[]).unwrap();
        assert!(out.best_trace.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(out.stage.report.fitness, opt.fitness);
    }

    #[test]
    fn pipeline_terminus_one_short_circuits() {
        let ev = Counting::new(PlantedOracle::new(BinaryPosition::ones(8)));
        let r = run_pipeline(&ev, 8, &cfg()).unwrap();
        assert_eq!(r.terminus, 1);
        assert_eq!(r.stage_evaluations, [9, 0, 0]);
        assert_eq!(r.unique_words, ev.calls());
        assert_eq!(r.best_report.fitness, 100.0);
    }

    #[test]
    fn pipeline_unreachable_target_runs_all_stages() {
        let ev = Counting::new(PlantedOracle::new("1010101010".parse().unwrap()));
        let c = PipelineConfig {
            stage_budget: StageBudget {
                systematic: None,
                random: 5,
                ga: Some(40),
            },
            ga: GaSettings {
                population: 10,
                generations: 50,
                ..GaSettings::default()
            },
            target_fitness: 99.0,
            ..cfg()
        };
        let r = run_pipeline(&ev, 10, &c).unwrap();
        assert_eq!(r.terminus, 3);
        assert_eq!(r.stage_evaluations[0], 11);
        assert_eq!(r.stage_evaluations[1], 5);
        assert!(r.stage_evaluations[2] <= 40);
        assert_eq!(r.unique_words, ev.calls());
        assert!(r.evaluations >= r.unique_words);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.random_removal_range = (1, 5);
        assert!(c.validate(10).is_err());
        c.random_removal_range = (2, 10);
        assert!(c.validate(10).is_err());
        c.random_removal_range = (2, 9);
        assert!(c.validate(10).is_ok());
        c.ga.population = 1;
        assert!(c.validate(10).is_err());
    }
}
