//! The `report` command and the tables shared with `run`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::Args;
use phyloswarm::report::{
    best_per_swarm_table, compare_methods, fmt_num, topology_table, MethodSummary, Table, ABSENT,
};
use phyloswarm::runtime::RunLedger;

use crate::Failure;

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Run directories, ledger files or `summary.tsv` files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Also write the tables (text and TSV) into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// One line of `summary.tsv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub instance: String,
    pub swarm: usize,
    pub rep: usize,
    pub method: String,
    pub particles: Option<usize>,
    pub seed: u64,
    pub word: String,
    pub b: f64,
    pub p: f64,
    pub fitness: f64,
    pub iterations: Option<usize>,
    pub evaluations: usize,
    pub terminus: Option<u8>,
}

const SUMMARY_HEADERS: [&str; 13] = [
    "instance",
    "swarm",
    "rep",
    "method",
    "particles",
    "seed",
    "word",
    "b",
    "p",
    "F",
    "iterations",
    "evaluations",
    "terminus",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| ABSENT.to_owned(), |x| x.to_string())
}

impl SummaryRow {
    fn cells(&self) -> Vec<String> {
        vec![
            self.instance.clone(),
            self.swarm.to_string(),
            self.rep.to_string(),
            self.method.clone(),
            opt(self.particles),
            self.seed.to_string(),
            self.word.clone(),
            fmt_num(self.b),
            fmt_num(self.p),
            fmt_num(self.fitness),
            opt(self.iterations),
            self.evaluations.to_string(),
            opt(self.terminus),
        ]
    }

    fn parse(line: &str) -> anyhow::Result<Self> {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != SUMMARY_HEADERS.len() {
            bail!("expected {} fields, found {}", SUMMARY_HEADERS.len(), f.len());
        }
        fn num<T: std::str::FromStr>(s: &str) -> anyhow::Result<T> {
            s.parse().map_err(|_| anyhow!("bad number {s:?}"))
        }
        fn maybe<T: std::str::FromStr>(s: &str) -> anyhow::Result<Option<T>> {
            if s == ABSENT {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        }
        Ok(Self {
            instance: f[0].to_owned(),
            swarm: num(f[1])?,
            rep: num(f[2])?,
            method: f[3].to_owned(),
            particles: maybe(f[4])?,
            seed: num(f[5])?,
            word: f[6].to_owned(),
            b: num(f[7])?,
            p: num(f[8])?,
            fitness: num(f[9])?,
            iterations: maybe(f[10])?,
            evaluations: num(f[11])?,
            terminus: maybe(f[12])?,
        })
    }
}

pub fn summary_table(rows: &[SummaryRow]) -> Table {
    let mut t = Table::new(&SUMMARY_HEADERS);
    for r in rows {
        t.push(r.cells());
    }
    t
}

pub fn read_summary(path: &Path) -> anyhow::Result<Vec<SummaryRow>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.split('\t').eq(SUMMARY_HEADERS) => {}
        _ => bail!("{}: missing summary header", path.display()),
    }
    lines
        .enumerate()
        .map(|(i, l)| SummaryRow::parse(l).with_context(|| format!("{} line {}", path.display(), i + 2)))
        .collect()
}

pub struct Tables {
    pub summary: Table,
    pub topologies: Table,
    pub swarms: Table,
    pub methods: Table,
}

pub fn build_tables(ledgers: &[RunLedger], summaries: &[SummaryRow]) -> Tables {
    let methods: Vec<MethodSummary> = summaries
        .iter()
        .map(|s| MethodSummary {
            instance: s.instance.clone(),
            method: s.method.clone(),
            particles: s.particles,
            best_b: s.b,
        })
        .collect();
    Tables {
        summary: summary_table(summaries),
        topologies: topology_table(ledgers),
        swarms: best_per_swarm_table(ledgers),
        methods: compare_methods(&methods),
    }
}

impl Tables {
    fn named(&self) -> [(&'static str, &Table); 4] {
        [
            ("summary", &self.summary),
            ("topologies", &self.topologies),
            ("best_per_swarm", &self.swarms),
            ("methods", &self.methods),
        ]
    }
}

/// Writes `<name>.txt` and `<name>.tsv` for every table.
pub fn write_tables(dir: &Path, tables: &Tables) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, t) in tables.named() {
        fs::write(dir.join(format!("{name}.txt")), t.to_text())?;
        fs::write(dir.join(format!("{name}.tsv")), t.to_tsv())?;
    }
    Ok(())
}

fn ledger_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "tsv"));
    files.sort();
    Ok(files)
}

fn collect(inputs: &[PathBuf]) -> anyhow::Result<(Vec<PathBuf>, Vec<PathBuf>)> {
    let mut ledgers = Vec::new();
    let mut summaries = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let ledger_dir = p.join("ledgers");
            if ledger_dir.is_dir() {
                ledgers.extend(ledger_files(&ledger_dir)?);
            }
            if p.join("summary.tsv").is_file() {
                summaries.push(p.join("summary.tsv"));
            }
        } else if p.file_name().is_some_and(|n| n == "summary.tsv") {
            summaries.push(p.clone());
        } else if p.is_file() {
            ledgers.push(p.clone());
        } else {
            bail!("no such file or directory: {}", p.display());
        }
    }
    Ok((ledgers, summaries))
}

pub fn report(args: &ReportArgs) -> Result<(), Failure> {
    let (ledger_paths, summary_paths) = collect(&args.inputs).map_err(Failure::Input)?;
    let ledgers = ledger_paths
        .iter()
        .map(|p| RunLedger::load(p).with_context(|| format!("ledger {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()
        .map_err(Failure::Input)?;
    let mut summaries = Vec::new();
    for p in &summary_paths {
        summaries.extend(read_summary(p).map_err(Failure::Input)?);
    }
    let tables = build_tables(&ledgers, &summaries);
    for (name, t) in tables.named() {
        if t.rows.is_empty() {
            continue;
        }
        println!("{name}");
        println!("{}", t.to_text());
    }
    if let Some(out) = &args.out {
        write_tables(out, &tables).with_context(|| format!("cannot write {}", out.display()))?;
    }
    Ok(())
}
