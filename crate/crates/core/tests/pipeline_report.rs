use std::sync::Arc;

use phyloswarm::engine::{Bpso, Sequential};
use phyloswarm::fitness::{Counting, FitnessEvaluator, MemoCache, Memoized, PlantedOracle};
use phyloswarm::ga::{run_pipeline, run_pipeline_with_cache, PipelineConfig};
use phyloswarm::phylo::synth::{blurring_fixture, BlurringParams};
use phyloswarm::phylo::{PhyloEvaluator, PhyloSettings};
use phyloswarm::report::{
    best_per_swarm_rows, compare_methods, topology_rows, topology_table, MethodSummary,
};
use phyloswarm::runtime::RunLedger;
use phyloswarm::{BinaryPosition, EngineConfig};

#[test]
fn memoization_does_not_change_results() {
    let plain = PlantedOracle::new("110111011111".parse().unwrap()).with_noise(4.0, 2);
    let counted = Counting::new(plain.clone());
    let memo = Memoized::new(&counted);
    let cfg = PipelineConfig {
        target_fitness: 101.0,
        ..PipelineConfig::default()
    };
    let direct = run_pipeline(&plain, 12, &cfg).unwrap();
    let cached = run_pipeline(&memo, 12, &cfg).unwrap();
    assert_eq!(direct.best_word, cached.best_word);
    assert_eq!(direct.best_report, cached.best_report);
    assert_eq!(direct.evaluations, cached.evaluations);
    assert_eq!(counted.calls(), cached.unique_words);
    assert!(cached.unique_words < cached.evaluations);
}

#[test]
fn cache_survives_a_save_and_load() {
    let ev = Counting::new(PlantedOracle::new("1011111111".parse().unwrap()));
    let cfg = PipelineConfig {
        target_fitness: 101.0,
        ..PipelineConfig::default()
    };
    let cache = Arc::new(MemoCache::new());
    let first = run_pipeline_with_cache(&ev, 10, &cfg, Arc::clone(&cache)).unwrap();
    let calls = ev.calls();
    assert_eq!(calls, cache.len());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.tsv");
    cache.save(&path).unwrap();
    let loaded = Arc::new(MemoCache::load(&path).unwrap());
    assert_eq!(loaded.len(), cache.len());
    let second = run_pipeline_with_cache(&ev, 10, &cfg, loaded).unwrap();
    assert_eq!(ev.calls(), calls);
    assert_eq!(second.unique_words, 0);
    assert_eq!(second.best_report, first.best_report);
}

fn swarm_ledgers(swarms: u64) -> Vec<RunLedger> {
    let fx = blurring_fixture(&BlurringParams::default(), 3);
    let ev = PhyloEvaluator::new(
        Arc::new(fx.matrix),
        PhyloSettings {
            replicates: 30,
            ..PhyloSettings::default()
        },
    );
    (0..swarms)
        .map(|s| {
            let cfg = EngineConfig {
                seed: 100 + s,
                max_iterations: 6,
                ..EngineConfig::default()
            };
            let mut ledger = RunLedger::new().with_meta("swarm", format!("s{s}"));
            let mut batch = Sequential(&ev);
            let mut bpso = Bpso::new(cfg, 10).unwrap();
            let mut state = bpso.initialize(&mut batch).unwrap();
            loop {
                for p in &state.particles {
                    let r = ev.evaluate(&p.position).unwrap();
                    ledger.push(state.iteration, p.id, p.position.clone(), r);
                }
                if state.iteration == 6 || state.global_best_report.fitness >= 95.0 {
                    break;
                }
                state = bpso.advance(&state, &mut batch).unwrap();
            }
            ledger
        })
        .collect()
}

#[test]
fn topology_report_over_swarms() {
    let ledgers = swarm_ledgers(3);
    let rows = topology_rows(&ledgers);
    assert!(rows.len() >= 2, "expected several topologies, got {}", rows.len());
    let total: usize = rows.iter().map(|r| r.occurrences).sum();
    assert_eq!(total, ledgers.iter().map(|l| l.entries.len()).sum::<usize>());
    for pair in rows.windows(2) {
        assert!(pair[0].best_fitness >= pair[1].best_fitness);
    }
    let text = topology_table(&ledgers).to_text();
    assert_eq!(text.lines().count(), rows.len() + 2);

    let best = best_per_swarm_rows(&ledgers);
    assert_eq!(
        best.iter().map(|r| r.swarm.as_str()).collect::<Vec<_>>(),
        ["s0", "s1", "s2"]
    );
    for r in &best {
        let w: BinaryPosition = r.word.parse().unwrap();
        assert_eq!(r.removed, 10 - w.ones_count());
    }
}

#[test]
fn method_comparison_rows_follow_first_appearance() {
    let s = |instance: &str, method: &str, particles: Option<usize>, b: f64| MethodSummary {
        instance: instance.into(),
        method: method.into(),
        particles,
        best_b: b,
    };
    let t = compare_methods(&[
        s("beta", "ga", None, 71.0),
        s("alpha", "bpso2", Some(10), 88.0),
        s("alpha", "ga", None, 80.0),
        s("alpha", "bpso1", Some(10), 85.5),
    ]);
    let tsv = t.to_tsv();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines[0], "instance\tbpso1/L=10\tbpso2/L=10\tga");
    assert_eq!(lines[1], "beta\t-\t-\t71");
    assert_eq!(lines[2], "alpha\t85.5\t88\t80");
}
