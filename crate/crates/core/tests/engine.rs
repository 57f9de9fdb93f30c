use std::sync::{Arc, Mutex};

use phyloswarm::engine::{run_bpso, Bpso, Sequential};
use phyloswarm::fitness::{Counting, FitnessEvaluator, PlantedOracle};
use phyloswarm::runtime::{
    join_workers, master_loop, spawn_channel_workers, FrameError, Kind, Link, Master, WireMessage,
};
use phyloswarm::{BinaryPosition, EngineConfig, Interval, Variant};

fn planted(n: usize, zeros: &[usize]) -> PlantedOracle {
    let mut w = BinaryPosition::ones(n);
    for &j in zeros {
        w.set(j, false);
    }
    PlantedOracle::new(w)
}

#[test]
fn same_seed_same_trajectory() {
    let ev = planted(20, &[3, 9, 14]).with_noise(2.0, 5);
    for variant in [Variant::VersionI, Variant::VersionII] {
        let cfg = EngineConfig {
            variant,
            seed: 42,
            max_iterations: 30,
            target_fitness: 101.0,
            ..EngineConfig::default()
        };
        let a = run_bpso(&cfg, &ev).unwrap();
        let b = run_bpso(&cfg, &ev).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.final_state, b.final_state);
        let other = run_bpso(&EngineConfig { seed: 43, ..cfg }, &ev).unwrap();
        assert_ne!(a.final_state.particles, other.final_state.particles);
    }
}

#[test]
fn global_best_never_decreases_and_stops_at_budget() {
    let ev = planted(15, &[1, 2]).with_noise(5.0, 1);
    let cfg = EngineConfig {
        seed: 7,
        max_iterations: 25,
        target_fitness: 101.0,
        ..EngineConfig::default()
    };
    let out = run_bpso(&cfg, &ev).unwrap();
    assert_eq!(out.trace.len(), 26);
    assert_eq!(out.final_state.iteration, 25);
    for pair in out.trace.windows(2) {
        assert!(pair[1].report.fitness >= pair[0].report.fitness);
    }
}

#[test]
fn stops_when_target_reached() {
    let ev = planted(10, &[]);
    let cfg = EngineConfig {
        seed: 3,
        ..EngineConfig::default()
    };
    let out = run_bpso(&cfg, &ev).unwrap();
    assert!(out.reached_target(&cfg));
    assert_eq!(out.final_state.iteration, 0);
}

#[test]
fn evaluation_count_is_particles_per_iteration() {
    let ev = Counting::new(planted(12, &[0, 5]));
    let cfg = EngineConfig {
        particles: 7,
        max_iterations: 9,
        target_fitness: 101.0,
        seed: 11,
        ..EngineConfig::default()
    };
    let out = Bpso::new(cfg, 12).unwrap().run(&mut Sequential(&ev)).unwrap();
    assert_eq!(out.trace.len(), 10);
    assert_eq!(ev.calls(), 7 * 10);
}

#[test]
fn large_instance_initial_words_are_mostly_ones() {
    let n = 82;
    let cfg = EngineConfig {
        particles: 40,
        seed: 2,
        ..EngineConfig::default()
    };
    let ev = planted(n, &[]);
    let state = Bpso::new(cfg, n).unwrap().initialize(&mut Sequential(&ev)).unwrap();
    assert_eq!(state.iteration, 0);
    for p in &state.particles {
        assert!(p.position.ones_count() >= 70, "{}", p.position.ones_count());
        assert!(p.velocity.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn wide_threshold_range_keeps_zeros_alive() {
    let cfg = EngineConfig {
        particles: 10,
        max_iterations: 20,
        target_fitness: 101.0,
        r_threshold_range: Interval::new(0.0, 1.0),
        seed: 9,
        ..EngineConfig::default()
    };
    let out = run_bpso(&cfg, &planted(30, &[0]).with_noise(1.0, 2)).unwrap();
    let zeros: usize = out
        .final_state
        .particles
        .iter()
        .map(|p| p.position.len() - p.position.ones_count())
        .sum();
    assert!(zeros > 0);
}

/// Records every message a master-side link sends.
struct Recording {
    inner: Box<dyn Link>,
    worker: usize,
    log: Arc<Mutex<Vec<(usize, WireMessage)>>>,
}

impl Link for Recording {
    fn send(&mut self, msg: &WireMessage) -> Result<(), FrameError> {
        self.log.lock().unwrap().push((self.worker, msg.clone()));
        self.inner.send(msg)
    }

    fn recv(&mut self) -> Result<WireMessage, FrameError> {
        self.inner.recv()
    }
}

fn recorded_run(particles: usize, workers: usize) -> (Vec<(usize, WireMessage)>, usize, usize) {
    let ev: Arc<dyn FitnessEvaluator> = Arc::new(planted(16, &[4, 8]).with_noise(1.0, 3));
    let cfg = EngineConfig {
        particles,
        max_iterations: 5,
        target_fitness: 101.0,
        seed: 21,
        ..EngineConfig::default()
    };
    let log = Arc::new(Mutex::new(Vec::new()));
    let (links, handles) = spawn_channel_workers(ev, workers);
    let links = links
        .into_iter()
        .enumerate()
        .map(|(worker, inner)| {
            Box::new(Recording {
                inner,
                worker,
                log: Arc::clone(&log),
            }) as Box<dyn Link>
        })
        .collect();
    let run = master_loop(&cfg, 16, Master::handshake(links, "rec").unwrap()).unwrap();
    let evaluated = join_workers(handles).unwrap();
    let log = Arc::try_unwrap(log).unwrap().into_inner().unwrap();
    (log, evaluated, run.ledger.entries.len())
}

#[test]
fn ten_particles_on_ten_workers_one_assign_each_per_iteration() {
    let (log, evaluated, entries) = recorded_run(10, 10);
    assert_eq!(evaluated, 60);
    assert_eq!(entries, 60);
    for iteration in 0..6u64 {
        let mut per_worker = [0usize; 10];
        for (w, m) in &log {
            if m.kind == Kind::Assign && m.iteration == iteration {
                per_worker[*w] += 1;
            }
        }
        assert_eq!(per_worker, [1; 10], "iteration {iteration}");
    }
    let stops = log.iter().filter(|(_, m)| m.kind == Kind::Stop).count();
    assert_eq!(stops, 10);
}

#[test]
fn three_workers_share_particles_round_robin() {
    let (log, _, _) = recorded_run(10, 3);
    for (w, m) in &log {
        if m.kind == Kind::Assign {
            assert_eq!(*w, m.particle_id as usize % 3);
        }
    }
}
