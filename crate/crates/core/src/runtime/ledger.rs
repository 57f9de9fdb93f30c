//! Per-run record of every evaluation result.
//!
//! File format: optional `#key=value` metadata lines, then one line per
//! result with tab-separated `iteration particle word b p fitness topology_id`
//! (`-` when there is no topology), optionally followed by an eighth column
//! holding the wall time in milliseconds since the run started.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::bits::{BinaryPosition, FitnessReport, TopologyId};
use crate::engine::TracePoint;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("ledger line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub iteration: usize,
    pub particle: usize,
    pub word: BinaryPosition,
    pub report: FitnessReport,
    pub wall_ms: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLedger {
    pub metadata: BTreeMap<String, String>,
    pub entries: Vec<LedgerEntry>,
}

impl RunLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_owned(), value.to_string());
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    pub fn push(&mut self, iteration: usize, particle: usize, word: BinaryPosition, report: FitnessReport) {
        self.entries.push(LedgerEntry {
            iteration,
            particle,
            word,
            report,
            wall_ms: None,
        });
    }

    pub fn push_timed(
        &mut self,
        iteration: usize,
        particle: usize,
        word: BinaryPosition,
        report: FitnessReport,
        wall_ms: u64,
    ) {
        self.push(iteration, particle, word, report);
        self.entries.last_mut().expect("just pushed").wall_ms = Some(wall_ms);
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (k, v) in &self.metadata {
            writeln!(out, "#{k}={v}")?;
        }
        for e in &self.entries {
            let topo = e
                .report
                .topology
                .map_or_else(|| "-".to_owned(), |t| t.to_string());
            write!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                e.iteration, e.particle, e.word, e.report.b, e.report.p, e.report.fitness, topo
            )?;
            match e.wall_ms {
                Some(ms) => writeln!(out, "\t{ms}")?,
                None => writeln!(out)?,
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut f = io::BufWriter::new(fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self, LedgerError> {
        let mut ledger = RunLedger::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let bad = |reason: String| LedgerError::Format {
                line: lineno,
                reason,
            };
            if line.trim().is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.split_once('=') {
                    ledger.metadata.insert(k.trim().to_owned(), v.trim().to_owned());
                }
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 7 && f.len() != 8 {
                return Err(bad(format!("expected 7 or 8 fields, found {}", f.len())));
            }
            let num = |k: usize| {
                f[k].parse::<f64>()
                    .map_err(|_| bad(format!("bad number {:?}", f[k])))
            };
            let int = |k: usize| {
                f[k].parse::<usize>()
                    .map_err(|_| bad(format!("bad integer {:?}", f[k])))
            };
            let topology = match f[6] {
                "-" => None,
                t => Some(
                    t.parse::<TopologyId>()
                        .map_err(|_| bad(format!("bad topology id {t:?}")))?,
                ),
            };
            let word = f[2]
                .parse::<BinaryPosition>()
                .map_err(|_| bad(format!("bad word {:?}", f[2])))?;
            ledger.push(
                int(0)?,
                int(1)?,
                word,
                FitnessReport {
                    b: num(3)?,
                    p: num(4)?,
                    fitness: num(5)?,
                    topology,
                },
            );
            if f.len() == 8 {
                let ms = f[7]
                    .parse::<u64>()
                    .map_err(|_| bad(format!("bad wall time {:?}", f[7])))?;
                ledger.entries.last_mut().expect("just pushed").wall_ms = Some(ms);
            }
        }
        Ok(ledger)
    }

    pub fn load(path: &Path) -> Result<Self, LedgerError> {
        Self::read_from(BufReader::new(fs::File::open(path)?))
    }

    /// Highest-fitness entry; the earliest one wins ties.
    pub fn best(&self) -> Option<&LedgerEntry> {
        self.entries.iter().fold(None, |best: Option<&LedgerEntry>, e| match best {
            Some(b) if e.report.fitness <= b.report.fitness => Some(b),
            _ => Some(e),
        })
    }

    pub fn iterations(&self) -> usize {
        self.entries.iter().map(|e| e.iteration + 1).max().unwrap_or(0)
    }

    /// Rebuilds the per-iteration global-best trace the engine produced:
    /// entries are taken in (iteration, particle) order and the best is
    /// replaced only on strict improvement.
    pub fn global_best_trace(&self) -> Vec<TracePoint> {
        let mut sorted: Vec<&LedgerEntry> = self.entries.iter().collect();
        sorted.sort_by_key(|e| (e.iteration, e.particle));
        let mut trace: Vec<TracePoint> = Vec::new();
        let mut best: Option<&LedgerEntry> = None;
        let mut i = 0;
        while i < sorted.len() {
            let iteration = sorted[i].iteration;
            while i < sorted.len() && sorted[i].iteration == iteration {
                let e = sorted[i];
                if best.is_none_or(|b| e.report.fitness > b.report.fitness) {
                    best = Some(e);
                }
                i += 1;
            }
            let b = best.expect("at least one entry");
            trace.push(TracePoint {
                iteration,
                word: b.word.clone(),
                report: b.report.clone(),
            });
        }
        trace
    }
}
