use std::collections::BTreeSet;
use std::net::TcpListener;
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Instant;

use super::ledger::RunLedger;
use super::transport::{accept_links, ChannelLink, Link, TcpLink};
use super::wire::{FrameError, Kind, WireMessage};
use super::worker::{worker_loop, WorkerStats};
use super::RuntimeError;
use crate::bits::{BinaryPosition, FitnessReport};
use crate::engine::{should_terminate, BatchEvaluator, Bpso, EngineConfig, RunOutcome, TracePoint};
use crate::fitness::{EvalError, FitnessEvaluator};

/// Dispatches particle evaluations to workers and gathers the results behind
/// a per-iteration barrier.
///
/// Particles are assigned round-robin over the live workers. If a worker's
/// link fails, its outstanding particles are reassigned to the remaining
/// workers. Results are keyed by particle id, so arrival order never matters
/// and a second RESULT for the same particle is dropped.
pub struct Master {
    links: Vec<Box<dyn Link>>,
    alive: Vec<bool>,
    run_id: String,
    ledger: RunLedger,
    events: Vec<String>,
    started: Instant,
}

impl Master {
    /// Waits for HELLO on every link and acknowledges it.
    pub fn handshake(links: Vec<Box<dyn Link>>, run_id: &str) -> Result<Self, RuntimeError> {
        if links.is_empty() {
            return Err(RuntimeError::NoWorkers);
        }
        let mut m = Master {
            alive: vec![true; links.len()],
            links,
            run_id: run_id.to_owned(),
            ledger: RunLedger::new().with_meta("run", run_id),
            events: Vec::new(),
            started: Instant::now(),
        };
        for w in 0..m.links.len() {
            let hello = m.links[w].recv()?;
            if hello.kind != Kind::Hello {
                return Err(RuntimeError::Protocol(format!(
                    "worker {w} opened with {} instead of HELLO",
                    hello.kind
                )));
            }
            m.links[w].send(&WireMessage::hello(run_id, w as u64))?;
        }
        Ok(m)
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn live_workers(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    /// Notable runtime events (lost workers, duplicates, stale results).
    pub fn events(&self) -> &[String] {
        &self.events
    }

    pub fn ledger(&self) -> &RunLedger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut RunLedger {
        &mut self.ledger
    }

    pub fn into_parts(self) -> (RunLedger, Vec<String>) {
        (self.ledger, self.events)
    }

    fn live(&self) -> Vec<usize> {
        (0..self.links.len()).filter(|&w| self.alive[w]).collect()
    }

    fn lose(&mut self, w: usize, why: &FrameError) {
        if self.alive[w] {
            self.alive[w] = false;
            self.events.push(format!("worker {w} lost: {why}"));
        }
    }

    /// Sends `particle` to some live worker, starting the search at `cursor`.
    fn dispatch(
        &mut self,
        iteration: usize,
        particle: usize,
        word: &BinaryPosition,
        cursor: &mut usize,
        pending: &mut [BTreeSet<usize>],
    ) -> Result<(), RuntimeError> {
        loop {
            let live = self.live();
            if live.is_empty() {
                return Err(RuntimeError::NoWorkers);
            }
            let w = live[*cursor % live.len()];
            *cursor += 1;
            let msg = WireMessage::assign(&self.run_id, iteration as u64, particle as u64, word);
            match self.links[w].send(&msg) {
                Ok(()) => {
                    pending[w].insert(particle);
                    return Ok(());
                }
                Err(e) => self.lose(w, &e),
            }
        }
    }

    fn gather(
        &mut self,
        iteration: usize,
        words: &[(usize, BinaryPosition)],
    ) -> Result<Vec<FitnessReport>, RuntimeError> {
        let slot_of = |pid: usize| words.iter().position(|(p, _)| *p == pid);
        let mut pending = vec![BTreeSet::new(); self.links.len()];
        let mut cursor = 0;
        for (pid, word) in words {
            self.dispatch(iteration, *pid, word, &mut cursor, &mut pending)?;
        }
        let mut results: Vec<Option<FitnessReport>> = vec![None; words.len()];
        while let Some(w) = (0..self.links.len()).find(|&w| self.alive[w] && !pending[w].is_empty()) {
            match self.links[w].recv() {
                Ok(msg) => match msg.kind {
                    Kind::Result => {
                        let pid = msg.particle_id as usize;
                        if msg.run_id != self.run_id || msg.iteration as usize != iteration {
                            self.events.push(format!(
                                "stale RESULT from worker {w} (run {:?}, iteration {})",
                                msg.run_id, msg.iteration
                            ));
                            continue;
                        }
                        let Some(slot) = slot_of(pid) else {
                            self.events.push(format!("RESULT for unknown particle {pid} from worker {w}"));
                            continue;
                        };
                        pending[w].remove(&pid);
                        if results[slot].is_some() {
                            self.events.push(format!("duplicate RESULT for particle {pid} dropped"));
                            continue;
                        }
                        if msg.word != words[slot].1.to_string() {
                            return Err(RuntimeError::Protocol(format!(
                                "worker {w} answered particle {pid} for a different word"
                            )));
                        }
                        results[slot] = Some(msg.report()?);
                    }
                    Kind::Error => {
                        return Err(RuntimeError::Remote(format!("worker {w}: {}", msg.message)))
                    }
                    other => self.events.push(format!("ignored {other} from worker {w}")),
                },
                Err(e) => {
                    self.lose(w, &e);
                    let orphans: Vec<usize> = std::mem::take(&mut pending[w]).into_iter().collect();
                    for pid in orphans {
                        let slot = slot_of(pid).expect("pending particle is in the batch");
                        if results[slot].is_none() {
                            self.events.push(format!("particle {pid} reassigned"));
                            let word = words[slot].1.clone();
                            self.dispatch(iteration, pid, &word, &mut cursor, &mut pending)?;
                        }
                    }
                }
            }
        }
        let reports: Vec<FitnessReport> = results
            .into_iter()
            .map(|r| r.expect("barrier waits for every particle"))
            .collect();
        let ms = self.started.elapsed().as_millis() as u64;
        for ((pid, word), report) in words.iter().zip(&reports) {
            self.ledger
                .push_timed(iteration, *pid, word.clone(), report.clone(), ms);
        }
        Ok(reports)
    }

    /// Announces the current global best to every live worker.
    pub fn broadcast_best(&mut self, point: &TracePoint) {
        let msg = WireMessage::best(
            &self.run_id,
            point.iteration as u64,
            &point.word,
            point.report.fitness,
        );
        for w in self.live() {
            if let Err(e) = self.links[w].send(&msg) {
                self.lose(w, &e);
            }
        }
    }

    /// Sends STOP to every live worker.
    pub fn stop(&mut self) {
        let msg = WireMessage::stop(&self.run_id);
        for w in self.live() {
            let _ = self.links[w].send(&msg);
        }
    }
}

impl BatchEvaluator for Master {
    fn evaluate_batch(
        &mut self,
        iteration: usize,
        words: &[(usize, BinaryPosition)],
    ) -> Result<Vec<FitnessReport>, EvalError> {
        self.gather(iteration, words)
            .map_err(|e| EvalError::Remote(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct DistributedRun {
    pub outcome: RunOutcome,
    pub ledger: RunLedger,
    pub events: Vec<String>,
}

/// Runs the swarm with evaluations served by `master`'s workers, then stops
/// them. The trajectory equals a sequential run with the same seed.
pub fn master_loop(cfg: &EngineConfig, n: usize, mut master: Master) -> Result<DistributedRun, RuntimeError> {
    let result = (|| {
        let mut bpso = Bpso::new(cfg.clone(), n)?;
        let mut state = bpso.initialize(&mut master)?;
        let mut trace = vec![TracePoint::of(&state)];
        master.broadcast_best(&trace[0]);
        while !should_terminate(&state, cfg) {
            state = bpso.advance(&state, &mut master)?;
            let point = TracePoint::of(&state);
            master.broadcast_best(&point);
            trace.push(point);
        }
        Ok::<_, RuntimeError>(RunOutcome {
            final_state: state,
            trace,
        })
    })();
    master.stop();
    let outcome = result?;
    let (ledger, events) = master.into_parts();
    Ok(DistributedRun {
        outcome,
        ledger: ledger
            .with_meta("n", n)
            .with_meta("variant", cfg.variant)
            .with_meta("seed", cfg.seed),
        events,
    })
}

pub type WorkerHandle = JoinHandle<Result<WorkerStats, RuntimeError>>;

/// Master-side links paired with the threads serving them.
pub type WorkerSet = (Vec<Box<dyn Link>>, Vec<WorkerHandle>);

/// Starts `count` worker threads joined to the master by in-process channels.
pub fn spawn_channel_workers(
    evaluator: Arc<dyn FitnessEvaluator>,
    count: usize,
) -> WorkerSet {
    (0..count)
        .map(|id| {
            let (master_end, mut worker_end) = ChannelLink::pair();
            let ev = Arc::clone(&evaluator);
            let h = thread::spawn(move || worker_loop(&*ev, &mut worker_end, id as u64));
            (Box::new(master_end) as Box<dyn Link>, h)
        })
        .unzip()
}

/// Starts `count` worker threads that connect to `listener` over TCP and
/// accepts their connections.
pub fn spawn_tcp_workers(
    evaluator: Arc<dyn FitnessEvaluator>,
    count: usize,
    listener: &TcpListener,
) -> Result<WorkerSet, RuntimeError> {
    let addr = listener.local_addr()?;
    let handles: Vec<WorkerHandle> = (0..count)
        .map(|id| {
            let ev = Arc::clone(&evaluator);
            thread::spawn(move || {
                let mut link = TcpLink::connect(addr)?;
                worker_loop(&*ev, &mut link, id as u64)
            })
        })
        .collect();
    let links = accept_links(listener, count)?
        .into_iter()
        .map(|l| Box::new(l) as Box<dyn Link>)
        .collect();
    Ok((links, handles))
}

/// Collects worker threads, returning the total number of evaluations.
pub fn join_workers(handles: Vec<WorkerHandle>) -> Result<usize, RuntimeError> {
    let mut total = 0;
    for h in handles {
        let stats = h
            .join()
            .map_err(|_| RuntimeError::Protocol("worker thread panicked".into()))??;
        total += stats.evaluated;
    }
    Ok(total)
}

/// Distributed run with `workers` in-process worker threads.
pub fn run_with_channel_workers(
    cfg: &EngineConfig,
    evaluator: Arc<dyn FitnessEvaluator>,
    workers: usize,
    run_id: &str,
) -> Result<DistributedRun, RuntimeError> {
    let n = evaluator.instance_size();
    let (links, handles) = spawn_channel_workers(evaluator, workers);
    let run = master_loop(cfg, n, Master::handshake(links, run_id)?);
    let joined = join_workers(handles);
    let run = run?;
    joined?;
    Ok(run)
}

/// Distributed run with `workers` worker threads talking TCP on loopback.
pub fn run_with_tcp_workers(
    cfg: &EngineConfig,
    evaluator: Arc<dyn FitnessEvaluator>,
    workers: usize,
    run_id: &str,
) -> Result<DistributedRun, RuntimeError> {
    let n = evaluator.instance_size();
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let (links, handles) = spawn_tcp_workers(evaluator, workers, &listener)?;
    let run = master_loop(cfg, n, Master::handshake(links, run_id)?);
    let joined = join_workers(handles);
    let run = run?;
    joined?;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_bpso, Variant};
    use crate::fitness::PlantedOracle;

    fn cfg(seed: u64) -> EngineConfig {
        EngineConfig {
            variant: Variant::VersionII,
            particles: 6,
            max_iterations: 15,
            target_fitness: 101.0,
            seed,
            ..EngineConfig::default()
        }
    }

    fn oracle() -> Arc<dyn FitnessEvaluator> {
        Arc::new(PlantedOracle::new("1011001110".parse().unwrap()).with_noise(3.0, 9))
    }

    #[test]
    fn channel_workers_match_sequential() {
        for workers in [1, 4] {
            let ev = oracle();
            let seq = run_bpso(&cfg(5), &*ev).unwrap();
            let dist = run_with_channel_workers(&cfg(5), ev, workers, "t").unwrap();
            assert_eq!(dist.outcome.final_state, seq.final_state);
            assert_eq!(dist.outcome.trace, seq.trace);
            assert_eq!(dist.ledger.global_best_trace(), seq.trace);
            assert_eq!(dist.ledger.entries.len(), 6 * 16);
        }
    }

    #[test]
    fn tcp_workers_match_sequential() {
        let ev = oracle();
        let seq = run_bpso(&cfg(8), &*ev).unwrap();
        let dist = run_with_tcp_workers(&cfg(8), ev, 3, "t").unwrap();
        assert_eq!(dist.outcome.trace, seq.trace);
    }

    /// Answers the first ASSIGN it sees, then drops the connection.
    struct Flaky {
        inner: ChannelLink,
        answered: bool,
    }

    impl Link for Flaky {
        fn send(&mut self, msg: &WireMessage) -> Result<(), FrameError> {
            if self.answered && msg.kind == Kind::Assign {
                return Err(FrameError::Closed);
            }
            self.inner.send(msg)
        }

        fn recv(&mut self) -> Result<WireMessage, FrameError> {
            if self.answered {
                return Err(FrameError::Closed);
            }
            let m = self.inner.recv()?;
            if m.kind == Kind::Result {
                self.answered = true;
            }
            Ok(m)
        }
    }

    #[test]
    fn lost_worker_is_replaced() {
        let ev = oracle();
        let seq = run_bpso(&cfg(2), &*ev).unwrap();
        let (mut links, handles) = spawn_channel_workers(Arc::clone(&ev), 3);
        let first = links.remove(0);
        // the flaky link wraps a healthy worker; keep it but make it fail
        drop(first);
        let (m_end, mut w_end) = ChannelLink::pair();
        let ev2 = Arc::clone(&ev);
        let flaky_worker = thread::spawn(move || worker_loop(&*ev2, &mut w_end, 9));
        links.insert(
            0,
            Box::new(Flaky {
                inner: m_end,
                answered: false,
            }),
        );
        let master = Master::handshake(links, "t").unwrap();
        let dist = master_loop(&cfg(2), 10, master).unwrap();
        assert_eq!(dist.outcome.trace, seq.trace);
        assert!(dist.events.iter().any(|e| e.contains("worker 0 lost")));
        let _ = flaky_worker.join();
        for h in handles {
            let _ = h.join();
        }
    }

    #[test]
    fn duplicate_results_are_dropped() {
        let (master_end, mut worker_end) = ChannelLink::pair();
        let t = thread::spawn(move || {
            worker_end.send(&WireMessage::hello("", 0)).unwrap();
            worker_end.recv().unwrap();
            let a = worker_end.recv().unwrap();
            let w = a.parsed_word().unwrap();
            let r = FitnessReport::new(50.0, 100.0, None).unwrap();
            let res = WireMessage::result("t", 0, 0, &w, &r);
            worker_end.send(&res).unwrap();
            worker_end.send(&res).unwrap();
            worker_end
        });
        let mut m = Master::handshake(vec![Box::new(master_end)], "t").unwrap();
        let words = vec![(0, BinaryPosition::ones(3))];
        let r = m.gather(0, &words).unwrap();
        assert_eq!(r[0].fitness, 75.0);
        let mut w = t.join().unwrap();
        // the duplicate is still queued; the next gather skips it as stale
        let t2 = thread::spawn(move || {
            let a = w.recv().unwrap();
            let r = FitnessReport::new(10.0, 100.0, None).unwrap();
            w.send(&WireMessage::result("t", 1, 0, &a.parsed_word().unwrap(), &r)).unwrap();
            w
        });
        let r = m.gather(1, &words).unwrap();
        assert_eq!(r[0].fitness, 55.0);
        assert!(m.events().iter().any(|e| e.contains("stale")));
        drop(t2.join().unwrap());
    }

    #[test]
    fn remote_error_aborts() {
        let ev: Arc<dyn FitnessEvaluator> = Arc::new(PlantedOracle::new("101".parse().unwrap()));
        let (links, handles) = spawn_channel_workers(ev, 2);
        let mut m = Master::handshake(links, "t").unwrap();
        let err = m.gather(0, &[(0, BinaryPosition::ones(5))]).unwrap_err();
        assert!(matches!(err, RuntimeError::Remote(_)));
        m.stop();
        drop(m);
        for h in handles {
            let _ = h.join();
        }
    }
}
