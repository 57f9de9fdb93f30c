//! Result tables built from run ledgers.
//!
//! Every table renders two ways with the same cell text: aligned columns for
//! reading ([`Table::to_text`]) and tab-separated values for tools
//! ([`Table::to_tsv`]).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::bits::TopologyId;
use crate::runtime::{LedgerEntry, RunLedger};

pub const ABSENT: &str = "-";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.headers.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_tsv(&self) -> String {
        let mut out = self.headers.join("\t");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join("\t"));
            out.push('\n');
        }
        out
    }

    /// Left-aligned first column, right-aligned numbers.
    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |cells: &[String], out: &mut String| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, &w))| {
                    if i == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&self.headers, &mut out);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        let _ = writeln!(out, "{}", rule.join("  "));
        for r in &self.rows {
            line(r, &mut out);
        }
        out
    }
}

/// Numbers for tables: at most two decimals, trailing zeros dropped.
pub fn fmt_num(x: f64) -> String {
    let s = format!("{x:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_owned()
    } else {
        s.to_owned()
    }
}

fn swarm_label(i: usize, l: &RunLedger) -> String {
    l.meta("swarm")
        .map(str::to_owned)
        .unwrap_or_else(|| i.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyRow {
    pub topology: TopologyId,
    pub swarms: BTreeSet<String>,
    pub best_b: f64,
    pub best_p: f64,
    pub best_fitness: f64,
    pub occurrences: usize,
}

/// Groups every evaluated tree by topology. Sorted by best fitness, then
/// occurrences (both descending), then topology id.
pub fn topology_rows(ledgers: &[RunLedger]) -> Vec<TopologyRow> {
    let mut groups: BTreeMap<TopologyId, TopologyRow> = BTreeMap::new();
    for (i, l) in ledgers.iter().enumerate() {
        let swarm = swarm_label(i, l);
        for e in &l.entries {
            let Some(t) = e.report.topology else { continue };
            let row = groups.entry(t).or_insert_with(|| TopologyRow {
                topology: t,
                swarms: BTreeSet::new(),
                best_b: f64::NEG_INFINITY,
                best_p: f64::NEG_INFINITY,
                best_fitness: f64::NEG_INFINITY,
                occurrences: 0,
            });
            row.swarms.insert(swarm.clone());
            row.best_b = row.best_b.max(e.report.b);
            row.best_p = row.best_p.max(e.report.p);
            row.best_fitness = row.best_fitness.max(e.report.fitness);
            row.occurrences += 1;
        }
    }
    let mut rows: Vec<TopologyRow> = groups.into_values().collect();
    rows.sort_by(|a, b| {
        b.best_fitness
            .total_cmp(&a.best_fitness)
            .then(b.occurrences.cmp(&a.occurrences))
            .then(a.topology.cmp(&b.topology))
    });
    rows
}

pub fn topology_table(ledgers: &[RunLedger]) -> Table {
    let mut t = Table::new(&["topology", "swarms", "best_b", "best_p", "best_F", "occurrences"]);
    for r in topology_rows(ledgers) {
        t.push(vec![
            r.topology.to_string(),
            r.swarms.iter().cloned().collect::<Vec<_>>().join(","),
            fmt_num(r.best_b),
            fmt_num(r.best_p),
            fmt_num(r.best_fitness),
            r.occurrences.to_string(),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmRow {
    pub swarm: String,
    pub word: String,
    pub removed: usize,
    pub fitness: f64,
    pub b: f64,
    pub p: f64,
}

/// Best entry per swarm, with the number of excluded genes. Ledgers that
/// share a swarm label (repetitions of one swarm) are pooled; rows follow the
/// order in which labels first appear and the earliest entry wins ties.
pub fn best_per_swarm_rows(ledgers: &[RunLedger]) -> Vec<SwarmRow> {
    let mut order: Vec<String> = Vec::new();
    let mut best: BTreeMap<String, &LedgerEntry> = BTreeMap::new();
    for (i, l) in ledgers.iter().enumerate() {
        let Some(e) = l.best() else { continue };
        let label = swarm_label(i, l);
        match best.get(&label) {
            Some(b) if e.report.fitness <= b.report.fitness => {}
            Some(_) => {
                best.insert(label, e);
            }
            None => {
                order.push(label.clone());
                best.insert(label, e);
            }
        }
    }
    order
        .into_iter()
        .map(|swarm| {
            let e = best[&swarm];
            SwarmRow {
                word: e.word.to_string(),
                removed: e.word.len() - e.word.ones_count(),
                fitness: e.report.fitness,
                b: e.report.b,
                p: e.report.p,
                swarm,
            }
        })
        .collect()
}

pub fn best_per_swarm_table(ledgers: &[RunLedger]) -> Table {
    let mut t = Table::new(&["swarm", "removed", "F", "b", "p", "word"]);
    for r in best_per_swarm_rows(ledgers) {
        t.push(vec![
            r.swarm,
            r.removed.to_string(),
            fmt_num(r.fitness),
            fmt_num(r.b),
            fmt_num(r.p),
            r.word,
        ]);
    }
    t
}

/// Best result of one method on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub instance: String,
    /// `bpso1`, `bpso2` or `ga`.
    pub method: String,
    pub particles: Option<usize>,
    pub best_b: f64,
}

impl MethodSummary {
    pub fn column(&self) -> String {
        column_label(&self.method, self.particles)
    }
}

fn method_rank(m: &str) -> usize {
    ["bpso1", "bpso2", "ga"]
        .iter()
        .position(|k| *k == m)
        .unwrap_or(3)
}

fn column_label(method: &str, particles: Option<usize>) -> String {
    match particles {
        Some(l) => format!("{method}/L={l}"),
        None => method.to_owned(),
    }
}

fn comparison_table(summaries: &[MethodSummary], mut cols: Vec<(String, Option<usize>)>) -> Table {
    cols.sort_by(|a, b| (method_rank(&a.0), &a.0, a.1).cmp(&(method_rank(&b.0), &b.0, b.1)));
    cols.dedup();
    let mut instances: Vec<&str> = Vec::new();
    for s in summaries {
        if !instances.contains(&s.instance.as_str()) {
            instances.push(&s.instance);
        }
    }
    let mut headers = vec!["instance".to_owned()];
    headers.extend(cols.iter().map(|(m, l)| column_label(m, *l)));
    let mut t = Table {
        headers,
        rows: Vec::new(),
    };
    for inst in instances {
        let mut row = vec![inst.to_owned()];
        for (m, l) in &cols {
            let best = summaries
                .iter()
                .filter(|s| s.instance == inst && &s.method == m && &s.particles == l)
                .map(|s| s.best_b)
                .reduce(f64::max);
            row.push(best.map_or_else(|| ABSENT.to_owned(), fmt_num));
        }
        t.push(row);
    }
    t
}

/// One row per instance, one column per method and particle count holding
/// the best `b`. Columns are ordered `bpso1`, `bpso2`, `ga`, then by
/// particle count. A combination with no summary shows [`ABSENT`]; when one
/// combination has several summaries the highest `b` is shown.
pub fn compare_methods(summaries: &[MethodSummary]) -> Table {
    let cols = summaries
        .iter()
        .map(|s| (s.method.clone(), s.particles))
        .collect();
    comparison_table(summaries, cols)
}

/// Like [`compare_methods`], but every `expected` column is present even
/// when no summary fills it.
pub fn compare_methods_with_columns(
    summaries: &[MethodSummary],
    expected: &[(&str, Option<usize>)],
) -> Table {
    let cols = summaries
        .iter()
        .map(|s| (s.method.clone(), s.particles))
        .chain(expected.iter().map(|(m, l)| (m.to_string(), *l)))
        .collect();
    comparison_table(summaries, cols)
}
