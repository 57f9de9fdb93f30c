//! The `run` and `evaluate` commands.

use std::fs;
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use anyhow::{anyhow, Context};
use phyloswarm::config::{Method, RunConfig, TransportKind};
use phyloswarm::engine::EngineConfig;
use phyloswarm::fitness::{EvalError, FitnessEvaluator};
use phyloswarm::ga::run_pipeline;
use phyloswarm::phylo::to_newick;
use phyloswarm::report::{fmt_num, ABSENT};
use phyloswarm::rng::derive_seed;
use phyloswarm::runtime::{
    accept_links, join_workers, master_loop, run_with_channel_workers, spawn_tcp_workers,
    DistributedRun, Link, Master, RunLedger,
};
use phyloswarm::{BinaryPosition, FitnessReport};

use crate::report_cmd::{self, SummaryRow};
use crate::setup::{build_instance, load_config, save_cache, Instance};
use crate::{EvaluateArgs, Failure, RunArgs};

/// Outcome of one swarm repetition.
struct RunRecord {
    summary: SummaryRow,
    ledger: RunLedger,
    best_word: BinaryPosition,
}

fn flag_overrides(a: &RunArgs) -> Vec<(&'static str, String)> {
    let mut v = Vec::new();
    let mut add = |key, value: Option<String>| {
        if let Some(value) = value {
            v.push((key, value));
        }
    };
    add("runtime.method", a.method.clone());
    add("engine.L", a.particles.map(|x| x.to_string()));
    add("runtime.swarms", a.swarms.map(|x| x.to_string()));
    add("runtime.reps", a.reps.map(|x| x.to_string()));
    add("runtime.transport", a.transport.clone());
    add("runtime.port", a.port.map(|x| x.to_string()));
    add("runtime.workers", a.workers.map(|x| x.to_string()));
    add("report.output_dir", a.out.as_ref().map(|p| p.display().to_string()));
    v
}

pub fn run(args: &RunArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config, &flag_overrides(args))?;
    let instance = build_instance(&cfg)?;
    let out = &cfg.report.output_dir;
    fs::create_dir_all(out.join("ledgers"))
        .with_context(|| format!("cannot create {}", out.display()))?;
    fs::write(out.join("config.txt"), cfg.to_text())?;

    let jobs: Vec<(usize, usize)> = (0..cfg.runtime.swarms)
        .flat_map(|s| (0..cfg.runtime.reps).map(move |r| (s, r)))
        .collect();
    let records: Vec<RunRecord> = match (cfg.runtime.method, cfg.runtime.transport) {
        (Method::Ga, _) | (_, TransportKind::Local) => {
            run_concurrently(&jobs, |s, r| run_job(&cfg, &instance, s, r, None))?
        }
        (_, TransportKind::Tcp) => {
            let host = if cfg.runtime.spawn_workers { "127.0.0.1" } else { "0.0.0.0" };
            let listener = TcpListener::bind((host, cfg.runtime.port))
                .with_context(|| format!("cannot listen on port {}", cfg.runtime.port))?;
            if !cfg.runtime.spawn_workers {
                eprintln!(
                    "waiting for {} worker(s) on {}",
                    cfg.runtime.workers,
                    listener.local_addr()?
                );
            }
            jobs.iter()
                .map(|&(s, r)| run_job(&cfg, &instance, s, r, Some(&listener)))
                .collect::<Result<_, _>>()?
        }
    };

    for rec in &records {
        let stem = run_stem(rec.summary.swarm, rec.summary.rep);
        rec.ledger.save(&out.join("ledgers").join(format!("{stem}.tsv")))?;
        if let Some(ev) = &instance.phylo {
            if let Some(tree) = ev.tree(&rec.best_word).map_err(eval_failure)? {
                fs::create_dir_all(out.join("trees"))?;
                let text = to_newick(&tree, ev.matrix().outgroup());
                fs::write(out.join("trees").join(format!("{stem}.nwk")), text + "\n")?;
            }
        }
    }
    save_cache(&cfg, &instance)?;

    let summaries: Vec<SummaryRow> = records.iter().map(|r| r.summary.clone()).collect();
    let ledgers: Vec<RunLedger> = records.into_iter().map(|r| r.ledger).collect();
    let tables = report_cmd::build_tables(&ledgers, &summaries);
    report_cmd::write_tables(out, &tables)?;
    print!("{}", tables.swarms.to_text());
    let best = summaries
        .iter()
        .reduce(|a, b| if b.fitness > a.fitness { b } else { a });
    if let Some(best) = best {
        println!(
            "best: F={} b={} p={} word={} (s{} r{})",
            fmt_num(best.fitness),
            fmt_num(best.b),
            fmt_num(best.p),
            best.word,
            best.swarm,
            best.rep
        );
        if let Some(names) = instance.gene_names() {
            let removed: Vec<&str> = best
                .word
                .chars()
                .zip(&names)
                .filter(|(c, _)| *c == '0')
                .map(|(_, n)| n.as_str())
                .collect();
            let list = if removed.is_empty() { "none".to_owned() } else { removed.join(", ") };
            println!("removed genes: {list}");
        }
    }
    println!("results written to {}", out.display());
    Ok(())
}

/// Runs jobs on a few plain threads and returns results in job order. Jobs
/// wait on their workers, so they stay off the rayon pool that the
/// evaluators use for bootstrapping.
fn run_concurrently<T: Send>(
    jobs: &[(usize, usize)],
    job: impl Fn(usize, usize) -> Result<T, Failure> + Sync,
) -> Result<Vec<T>, Failure> {
    let threads = thread::available_parallelism().map_or(1, |n| n.get()).clamp(1, jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<T, Failure>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(s, r)) = jobs.get(i) else { break };
                *slots[i].lock().expect("result slot") = Some(job(s, r));
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("result slot").expect("every job ran"))
        .collect()
}

pub fn run_stem(swarm: usize, rep: usize) -> String {
    format!("s{swarm:02}_r{rep:02}")
}

fn eval_failure(e: EvalError) -> Failure {
    match e {
        EvalError::Bits(_) | EvalError::Phylo(_) => Failure::Input(e.into()),
        other => Failure::Run(other.into()),
    }
}

fn run_job(
    cfg: &RunConfig,
    instance: &Instance,
    swarm: usize,
    rep: usize,
    listener: Option<&TcpListener>,
) -> Result<RunRecord, Failure> {
    let n = instance.size();
    let (s, r) = (swarm as u64, rep as u64);
    let instance_name = &cfg.report.instance;
    let mut summary = SummaryRow {
        instance: instance_name.clone(),
        swarm,
        rep,
        method: cfg.runtime.method.as_str().to_owned(),
        particles: None,
        seed: 0,
        word: String::new(),
        b: 0.0,
        p: 0.0,
        fitness: 0.0,
        iterations: None,
        evaluations: 0,
        terminus: None,
    };

    let (ledger, best_word, report) = match cfg.runtime.method.variant() {
        None => {
            let mut ga = cfg.ga.clone();
            ga.seed = derive_seed(cfg.ga.seed, s, r);
            summary.seed = ga.seed;
            let recorder = Recorder::new(&*instance.evaluator);
            let result = run_pipeline(&recorder, n, &ga).map_err(|e| Failure::Run(e.into()))?;
            summary.evaluations = result.evaluations;
            summary.terminus = Some(result.terminus);
            let ledger = recorder
                .into_ledger()
                .with_meta("terminus", result.terminus)
                .with_meta("seed", ga.seed)
                .with_meta("n", n);
            (ledger, result.best_word, result.best_report)
        }
        Some(variant) => {
            let engine = EngineConfig {
                variant,
                seed: derive_seed(cfg.engine.seed, s, r),
                ..cfg.engine.clone()
            };
            summary.seed = engine.seed;
            summary.particles = Some(engine.particles);
            let run_id = format!("{instance_name}-s{swarm}-r{rep}");
            let run = distributed(cfg, &engine, instance, &run_id, listener)?;
            summary.iterations = Some(run.outcome.final_state.iteration);
            summary.evaluations = run.ledger.entries.len();
            let best = run.outcome.best_word().clone();
            let report = run.outcome.best_report().clone();
            (run.ledger, best, report)
        }
    };
    summary.word = best_word.to_string();
    summary.b = report.b;
    summary.p = report.p;
    summary.fitness = report.fitness;
    let ledger = ledger
        .with_meta("swarm", format!("s{swarm}"))
        .with_meta("rep", rep)
        .with_meta("method", &summary.method)
        .with_meta("instance", instance_name);
    Ok(RunRecord {
        summary,
        ledger,
        best_word,
    })
}

fn distributed(
    cfg: &RunConfig,
    engine: &EngineConfig,
    instance: &Instance,
    run_id: &str,
    listener: Option<&TcpListener>,
) -> Result<DistributedRun, Failure> {
    let ev = Arc::clone(&instance.evaluator);
    let workers = cfg.runtime.workers;
    let run = match listener {
        None => run_with_channel_workers(engine, ev, workers, run_id),
        Some(l) if cfg.runtime.spawn_workers => (|| {
            let (links, handles) = spawn_tcp_workers(ev, workers, l)?;
            let run = master_loop(engine, instance.size(), Master::handshake(links, run_id)?);
            join_workers(handles)?;
            run
        })(),
        Some(l) => (|| {
            let links: Vec<Box<dyn Link>> = accept_links(l, workers)?
                .into_iter()
                .map(|link| Box::new(link) as Box<dyn Link>)
                .collect();
            master_loop(engine, instance.size(), Master::handshake(links, run_id)?)
        })(),
    };
    run.map_err(|e| Failure::Run(anyhow!(e).context(format!("run {run_id}"))))
}

/// Logs every evaluation that reaches the wrapped evaluator.
struct Recorder<'a> {
    inner: &'a dyn FitnessEvaluator,
    seen: Mutex<Vec<(BinaryPosition, FitnessReport)>>,
}

impl<'a> Recorder<'a> {
    fn new(inner: &'a dyn FitnessEvaluator) -> Self {
        Self {
            inner,
            seen: Mutex::new(Vec::new()),
        }
    }

    /// One entry per evaluated word, sorted by word.
    fn into_ledger(self) -> RunLedger {
        let mut seen = self.seen.into_inner().expect("recorder lock");
        seen.sort_by(|a, b| a.0.cmp(&b.0));
        let mut ledger = RunLedger::new();
        for (i, (w, r)) in seen.into_iter().enumerate() {
            ledger.push(0, i, w, r);
        }
        ledger
    }
}

impl FitnessEvaluator for Recorder<'_> {
    fn evaluate(&self, w: &BinaryPosition) -> Result<FitnessReport, EvalError> {
        let r = self.inner.evaluate(w)?;
        self.seen.lock().expect("recorder lock").push((w.clone(), r.clone()));
        Ok(r)
    }

    fn instance_size(&self) -> usize {
        self.inner.instance_size()
    }
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config, &[])?;
    let instance = build_instance(&cfg)?;
    println!("word\tb\tp\tF\ttopology");
    for text in &args.words {
        let w: BinaryPosition = text
            .parse()
            .map_err(|e| Failure::Input(anyhow!("bad word {text:?}: {e}")))?;
        let r = instance.evaluator.evaluate(&w).map_err(eval_failure)?;
        let topology = r.topology.map_or_else(|| ABSENT.to_owned(), |t| t.to_string());
        println!("{w}\t{}\t{}\t{}\t{topology}", r.b, r.p, r.fitness);
        if args.newick {
            match &instance.phylo {
                Some(ev) => match ev.tree(&w).map_err(eval_failure)? {
                    Some(tree) => println!("{}", to_newick(&tree, ev.matrix().outgroup())),
                    None => println!("-"),
                },
                None => return Err(Failure::Config(anyhow!("--newick needs fitness.evaluator = phylo"))),
            }
        }
    }
    save_cache(&cfg, &instance)?;
    Ok(())
}

