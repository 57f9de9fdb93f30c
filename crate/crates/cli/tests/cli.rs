use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use phyloswarm::phylo::synth::{blurring_fixture, BlurringParams};
use phyloswarm::runtime::RunLedger;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phyloswarm"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn planted_dir() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("planted.cfg"),
        "fitness.evaluator = planted\n\
         fitness.planted = 1111011110\n\
         fitness.noise = 1\n\
         engine.I_max = 15\n\
         engine.target_fitness = 101\n\
         report.instance = toy\n",
    )
    .unwrap();
    dir
}

/// Blurring fixture files plus a config pointing at them.
fn phylo_dir() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let fx = blurring_fixture(&BlurringParams::default(), 4);
    fs::write(dir.path().join("genes.fasta"), fx.matrix.to_fasta()).unwrap();
    fs::write(dir.path().join("genes.parts"), fx.matrix.partition_text()).unwrap();
    fs::write(
        dir.path().join("phylo.cfg"),
        "fitness.evaluator = phylo\n\
         phylo.fasta = genes.fasta\n\
         phylo.partitions = genes.parts\n\
         phylo.replicates = 20\n\
         engine.I_max = 5\n\
         report.instance = blur\n",
    )
    .unwrap();
    dir
}

fn summary_rows(out: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(out.join("summary.tsv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(str::to_owned).collect())
        .collect()
}

fn ledgers(out: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(out.join("ledgers"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    v.sort();
    v
}

#[test]
fn swarms_times_reps_ledgers_and_one_summary() {
    let dir = planted_dir();
    let o = run_in(
        dir.path(),
        &["run", "--config", "planted.cfg", "--swarms", "10", "--reps", "10", "--set", "engine.I_max=3"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    assert_eq!(ledgers(&out).len(), 100);
    assert_eq!(summary_rows(&out).len(), 100);
    let swarms = fs::read_to_string(out.join("best_per_swarm.tsv")).unwrap();
    assert_eq!(swarms.lines().count(), 11);
}

#[test]
fn summary_best_matches_ledgers_and_reports_are_reproducible() {
    let dir = planted_dir();
    let o = run_in(dir.path(), &["run", "--config", "planted.cfg", "--swarms", "2", "--reps", "2", "--seed", "9"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    let rows = summary_rows(&out);
    for (row, path) in rows.iter().zip(ledgers(&out)) {
        let ledger = RunLedger::load(&path).unwrap();
        let best = ledger.best().unwrap();
        assert_eq!(row[6], best.word.to_string());
        assert_eq!(row[9], phyloswarm::report::fmt_num(best.report.fitness));
        assert_eq!(ledger.meta("swarm"), Some(format!("s{}", row[1]).as_str()));
    }

    let again = run_in(dir.path(), &["report", "out", "--out", "again"]);
    assert!(again.status.success(), "{}", stderr(&again));
    for name in ["summary", "topologies", "best_per_swarm", "methods"] {
        for ext in ["txt", "tsv"] {
            let file = format!("{name}.{ext}");
            assert_eq!(
                fs::read(out.join(&file)).unwrap(),
                fs::read(dir.path().join("again").join(&file)).unwrap(),
                "{file}"
            );
        }
    }
    assert!(stdout(&again).contains("best_per_swarm"));
}

#[test]
fn same_seed_same_results() {
    let dir = planted_dir();
    for out in ["a", "b"] {
        let o = run_in(dir.path(), &["run", "--config", "planted.cfg", "--method", "bpso1", "--out", out]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(
        fs::read(dir.path().join("a/summary.tsv")).unwrap(),
        fs::read(dir.path().join("b/summary.tsv")).unwrap()
    );
}

#[test]
fn ga_method_reports_terminus() {
    let dir = planted_dir();
    let o = run_in(
        dir.path(),
        &["run", "--config", "planted.cfg", "--method", "ga", "--set", "ga.target_fitness=90"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = summary_rows(&dir.path().join("out"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][3], "ga");
    assert!(["1", "2", "3"].contains(&rows[0][12].as_str()), "{:?}", rows[0]);
    let ledger = RunLedger::load(&ledgers(&dir.path().join("out"))[0]).unwrap();
    assert_eq!(ledger.meta("terminus"), Some(rows[0][12].as_str()));
}

#[test]
fn config_errors_exit_2() {
    let dir = planted_dir();
    let o = run_in(dir.path(), &["run", "--config", "planted.cfg", "--set", "engine.nonsense=3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("engine.nonsense"), "{}", stderr(&o));

    fs::write(dir.path().join("bad.cfg"), "engine.colour = blue\n").unwrap();
    let o = run_in(dir.path(), &["run", "--config", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("engine.colour"));

    let o = run_in(dir.path(), &["run", "--config", "missing.cfg"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run_in(dir.path(), &["run", "--config", "planted.cfg", "--set", "engine.L=zero"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluator_input_errors_exit_3() {
    let dir = phylo_dir();
    fs::write(dir.path().join("broken.parts"), "g1 = 1-3\ng2 = x\n").unwrap();
    let o = run_in(dir.path(), &["run", "--config", "phylo.cfg", "--set", "phylo.partitions=broken.parts"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let o = run_in(dir.path(), &["evaluate", "--config", "phylo.cfg", "--set", "phylo.fasta=nowhere.fasta", "1111111111"]);
    assert_eq!(o.status.code(), Some(3));

    let o = run_in(dir.path(), &["evaluate", "--config", "phylo.cfg", "11112"]);
    assert_eq!(o.status.code(), Some(3));
    let o = run_in(dir.path(), &["evaluate", "--config", "phylo.cfg", "111"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn evaluate_prints_scores_and_trees() {
    let dir = phylo_dir();
    let fx = blurring_fixture(&BlurringParams::default(), 4);
    let target = fx.target.to_string();
    let o = run_in(dir.path(), &["evaluate", "--config", "phylo.cfg", "--newick", &target, "0000000000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "word\tb\tp\tF\ttopology");
    assert!(lines[1].starts_with(&format!("{target}\t100\t90\t95\t")), "{}", lines[1]);
    assert!(lines[2].starts_with('(') && lines[2].ends_with(';'));
    assert_eq!(lines[3], "0000000000\t0\t0\t0\t-");
    assert_eq!(lines[4], "-");
}

#[test]
fn phylo_run_writes_trees_and_topologies() {
    let dir = phylo_dir();
    let o = run_in(dir.path(), &["run", "--config", "phylo.cfg", "--swarms", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    for stem in ["s00_r00", "s01_r00"] {
        let tree = fs::read_to_string(out.join("trees").join(format!("{stem}.nwk"))).unwrap();
        assert!(tree.trim_end().ends_with(';'));
    }
    let topo = fs::read_to_string(out.join("topologies.tsv")).unwrap();
    let occurrences: usize = topo
        .lines()
        .skip(1)
        .map(|l| l.rsplit('\t').next().unwrap().parse::<usize>().unwrap())
        .sum();
    let evaluated: usize = ledgers(&out)
        .iter()
        .map(|p| RunLedger::load(p).unwrap().entries.len())
        .sum();
    assert_eq!(occurrences, evaluated);
    assert!(stdout(&o).contains("removed genes:"));
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn spawn_worker(dir: &Path, port: u16, id: u64) -> Child {
    bin()
        .current_dir(dir)
        .args(["serve-worker", "--config", "planted.cfg", "--port", &port.to_string(), "--id", &id.to_string()])
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap()
}

#[test]
fn tcp_with_worker_processes_matches_local() {
    let dir = planted_dir();
    let local = run_in(dir.path(), &["run", "--config", "planted.cfg", "--reps", "2", "--out", "local"]);
    assert!(local.status.success(), "{}", stderr(&local));

    let port = free_port();
    let master = bin()
        .current_dir(dir.path())
        .args(["run", "--config", "planted.cfg", "--reps", "2", "--out", "tcp", "--transport", "tcp"])
        .args(["--port", &port.to_string(), "--workers", "2", "--set", "runtime.spawn_workers=false"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let workers = [spawn_worker(dir.path(), port, 0), spawn_worker(dir.path(), port, 1)];
    let master = master.wait_with_output().unwrap();
    assert!(master.status.success(), "{}", stderr(&master));
    for w in workers {
        let o = w.wait_with_output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stderr(&o).contains("served 2 run(s)"), "{}", stderr(&o));
    }
    assert_eq!(
        fs::read(dir.path().join("local/summary.tsv")).unwrap(),
        fs::read(dir.path().join("tcp/summary.tsv")).unwrap()
    );
}

#[test]
fn tcp_with_spawned_workers() {
    let dir = planted_dir();
    let port = free_port().to_string();
    let o = run_in(
        dir.path(),
        &["run", "--config", "planted.cfg", "--transport", "tcp", "--port", &port, "--workers", "3", "--particles", "7"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = summary_rows(&dir.path().join("out"));
    assert_eq!(rows[0][4], "7");
}
