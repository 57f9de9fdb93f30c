//! Python bindings: words, evaluators, the two optimizers, neighbor joining
//! and the wire codec.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use phyloswarm::config::RunConfig;
use phyloswarm::engine::{constriction, inertia_weight, run_bpso as core_run_bpso, sigmoid as core_sigmoid};
use phyloswarm::fitness::{brute_force_optimum, FitnessEvaluator};
use phyloswarm::ga::run_pipeline;
use phyloswarm::phylo::synth::{blurring_fixture, BlurringParams};
use phyloswarm::phylo::{
    load_gene_matrix, neighbor_joining as core_nj, parse_newick, robinson_foulds as core_rf,
    to_newick, DistanceMatrix, PhyloEvaluator as CorePhylo, PhyloSettings,
};
use phyloswarm::report::{best_per_swarm_table, topology_table};
use phyloswarm::runtime::wire::{decode_frame, encode_frame};
use phyloswarm::runtime::{Kind, RunLedger, WireMessage};
use phyloswarm::{BinaryPosition, FitnessReport as CoreReport, PMode, PlantedOracle as CoreOracle};
use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn word(text: &str) -> PyResult<BinaryPosition> {
    text.parse().map_err(value_err)
}

/// Score of one word: `b`, `p`, `fitness = (b + p) / 2` and the topology id
/// (`None` when the evaluator builds no tree).
#[pyclass(frozen, module = "phyloswarm")]
pub struct FitnessReport {
    inner: CoreReport,
}

#[pymethods]
impl FitnessReport {
    #[new]
    #[pyo3(signature = (b, p, topology = None))]
    fn new(b: f64, p: f64, topology: Option<&str>) -> PyResult<Self> {
        let topology = topology.map(|t| t.parse().map_err(value_err)).transpose()?;
        Ok(Self {
            inner: CoreReport::new(b, p, topology).map_err(value_err)?,
        })
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p
    }

    #[getter]
    fn fitness(&self) -> f64 {
        self.inner.fitness
    }

    #[getter]
    fn topology(&self) -> Option<String> {
        self.inner.topology.map(|t| t.to_string())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "FitnessReport(b={}, p={}, fitness={}, topology={:?})",
            self.inner.b,
            self.inner.p,
            self.inner.fitness,
            self.topology()
        )
    }
}

impl From<CoreReport> for FitnessReport {
    fn from(inner: CoreReport) -> Self {
        Self { inner }
    }
}

/// Word scored by distance to a planted optimum, with optional
/// deterministic noise.
#[pyclass(frozen, module = "phyloswarm")]
pub struct PlantedOracle {
    inner: Arc<CoreOracle>,
}

#[pymethods]
impl PlantedOracle {
    #[new]
    #[pyo3(signature = (planted, noise = 0.0, seed = 0, p_mode = "percent"))]
    fn new(planted: &str, noise: f64, seed: u64, p_mode: &str) -> PyResult<Self> {
        let mode: PMode = p_mode.parse().map_err(value_err)?;
        Ok(Self {
            inner: Arc::new(CoreOracle::new(word(planted)?).with_noise(noise, seed).with_p_mode(mode)),
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.instance_size()
    }

    fn evaluate(&self, w: &str) -> PyResult<FitnessReport> {
        Ok(self.inner.evaluate(&word(w)?).map_err(value_err)?.into())
    }

    /// Exhaustive optimum `(word, report)`; the lowest word wins ties.
    fn brute_force(&self, py: Python<'_>) -> PyResult<(String, FitnessReport)> {
        let ev = Arc::clone(&self.inner);
        let (w, r) = py.detach(move || brute_force_optimum(&*ev)).map_err(value_err)?;
        Ok((w.to_string(), r.into()))
    }
}

/// Bootstrap-support evaluator over a gene matrix.
#[pyclass(frozen, module = "phyloswarm")]
pub struct PhyloEvaluator {
    inner: Arc<CorePhylo>,
}

fn phylo_settings(replicates: usize, seed: u64, p_mode: &str) -> PyResult<PhyloSettings> {
    Ok(PhyloSettings {
        replicates,
        seed,
        p_mode: p_mode.parse().map_err(value_err)?,
        ..PhyloSettings::default()
    })
}

#[pymethods]
impl PhyloEvaluator {
    /// Loads a FASTA alignment and a `gene = start-end` partition file.
    #[staticmethod]
    #[pyo3(signature = (fasta, partitions, outgroup = None, replicates = 100, seed = 1, p_mode = "percent"))]
    fn from_files(
        fasta: PathBuf,
        partitions: PathBuf,
        outgroup: Option<&str>,
        replicates: usize,
        seed: u64,
        p_mode: &str,
    ) -> PyResult<Self> {
        let m = load_gene_matrix(&fasta, &partitions, outgroup).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(Self {
            inner: Arc::new(CorePhylo::new(Arc::new(m), phylo_settings(replicates, seed, p_mode)?)),
        })
    }

    /// Synthetic eight-taxon, ten-gene matrix with one discordant gene.
    /// Returns the evaluator and the word that drops exactly that gene.
    #[staticmethod]
    #[pyo3(signature = (seed = 0, replicates = 100))]
    fn blurring_fixture(seed: u64, replicates: usize) -> PyResult<(Self, String)> {
        let fx = blurring_fixture(&BlurringParams::default(), seed);
        let ev = CorePhylo::new(Arc::new(fx.matrix), phylo_settings(replicates, 1, "percent")?);
        Ok((Self { inner: Arc::new(ev) }, fx.target.to_string()))
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.instance_size()
    }

    #[getter]
    fn gene_names(&self) -> Vec<String> {
        self.inner.matrix().gene_names().into_iter().map(str::to_owned).collect()
    }

    #[getter]
    fn taxa(&self) -> Vec<String> {
        self.inner.matrix().taxa().to_vec()
    }

    fn evaluate(&self, py: Python<'_>, w: &str) -> PyResult<FitnessReport> {
        let w = word(w)?;
        let ev = Arc::clone(&self.inner);
        Ok(py.detach(move || ev.evaluate(&w)).map_err(value_err)?.into())
    }

    /// Newick text of the tree behind `w`, with supports; `None` for the
    /// all-zero word.
    fn newick(&self, py: Python<'_>, w: &str) -> PyResult<Option<String>> {
        let w = word(w)?;
        let ev = Arc::clone(&self.inner);
        let tree = py.detach(move || ev.tree(&w)).map_err(value_err)?;
        Ok(tree.map(|t| to_newick(&t, self.inner.matrix().outgroup())))
    }
}

fn evaluator_of(obj: &Bound<'_, PyAny>) -> PyResult<Arc<dyn FitnessEvaluator>> {
    if let Ok(o) = obj.cast::<PlantedOracle>() {
        return Ok(o.get().inner.clone());
    }
    if let Ok(p) = obj.cast::<PhyloEvaluator>() {
        return Ok(p.get().inner.clone());
    }
    Err(PyValueError::new_err("evaluator must be a PlantedOracle or a PhyloEvaluator"))
}

fn config_with(config: Option<HashMap<String, String>>) -> PyResult<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut entries: Vec<(String, String)> = config.unwrap_or_default().into_iter().collect();
    entries.sort();
    for (k, v) in entries {
        cfg.set(&k, &v).map_err(|e| PyKeyError::new_err(e.to_string()))?;
    }
    Ok(cfg)
}

fn report_dict<'py>(py: Python<'py>, w: &BinaryPosition, r: &CoreReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("best_word", w.to_string())?;
    d.set_item("b", r.b)?;
    d.set_item("p", r.p)?;
    d.set_item("fitness", r.fitness)?;
    d.set_item("topology", r.topology.map(|t| t.to_string()))?;
    Ok(d)
}

/// Binary PSO run. `config` maps configuration keys such as `engine.L`,
/// `engine.I_max` or `engine.variant` to values.
#[pyfunction]
#[pyo3(signature = (evaluator, seed = 0, config = None))]
fn run_bpso<'py>(
    py: Python<'py>,
    evaluator: &Bound<'py, PyAny>,
    seed: u64,
    config: Option<HashMap<String, String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let ev = evaluator_of(evaluator)?;
    let mut engine = config_with(config)?.engine;
    engine.seed = seed;
    let out = py.detach(move || core_run_bpso(&engine, &*ev)).map_err(value_err)?;
    let d = report_dict(py, out.best_word(), out.best_report())?;
    d.set_item("iterations", out.final_state.iteration)?;
    let trace: Vec<f64> = out.trace.iter().map(|t| t.report.fitness).collect();
    d.set_item("trace", trace)?;
    Ok(d)
}

/// Systematic, random and genetic stages in turn. `config` maps `ga.*`
/// keys to values.
#[pyfunction]
#[pyo3(signature = (evaluator, seed = 0, config = None))]
fn run_ga<'py>(
    py: Python<'py>,
    evaluator: &Bound<'py, PyAny>,
    seed: u64,
    config: Option<HashMap<String, String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let ev = evaluator_of(evaluator)?;
    let mut ga = config_with(config)?.ga;
    ga.seed = seed;
    let n = ev.instance_size();
    let out = py.detach(move || run_pipeline(&*ev, n, &ga)).map_err(value_err)?;
    let d = report_dict(py, &out.best_word, &out.best_report)?;
    d.set_item("terminus", out.terminus)?;
    d.set_item("evaluations", out.evaluations)?;
    d.set_item("unique_words", out.unique_words)?;
    d.set_item("stage_evaluations", out.stage_evaluations.to_vec())?;
    Ok(d)
}

#[pyfunction]
fn combine_fitness(b: f64, p: f64) -> PyResult<f64> {
    phyloswarm::combine_fitness(b, p).map_err(value_err)
}

#[pyfunction]
fn percentage_ones(w: &str) -> PyResult<f64> {
    phyloswarm::percentage_ones(&word(w)?).map_err(value_err)
}

#[pyfunction]
fn sigmoid(v: f64) -> PyResult<f64> {
    core_sigmoid(v).map_err(value_err)
}

/// Constriction coefficient for acceleration constants `c1`, `c2` and `k`.
#[pyfunction]
#[pyo3(signature = (c1 = 2.05, c2 = 2.05, k = 1.0))]
fn constriction_coefficient(c1: f64, c2: f64, k: f64) -> PyResult<f64> {
    constriction(c1, c2, k).map_err(value_err)
}

/// Inertia weight at `iteration` of a run with `max_iterations`.
#[pyfunction]
#[pyo3(signature = (iteration, max_iterations = 100, w_max = 0.9, w_min = 0.4))]
fn inertia(iteration: usize, max_iterations: usize, w_max: f64, w_min: f64) -> PyResult<f64> {
    let cfg = phyloswarm::EngineConfig {
        max_iterations,
        w_max,
        w_min,
        ..Default::default()
    };
    inertia_weight(&cfg, iteration).map_err(value_err)
}

/// Neighbor-joining tree of a symmetric distance matrix, as Newick rooted
/// on the first taxon.
#[pyfunction]
fn neighbor_joining(distances: Vec<Vec<f64>>, taxa: Vec<String>) -> PyResult<String> {
    if distances.len() != taxa.len() || distances.iter().any(|r| r.len() != taxa.len()) {
        return Err(PyValueError::new_err("distance matrix must be square and match the taxa"));
    }
    let tree = core_nj(&DistanceMatrix::from_rows(&distances), &taxa).map_err(value_err)?;
    Ok(to_newick(&tree, 0))
}

/// Topology id (16 hex digits) of a Newick tree; independent of leaf order
/// and rooting.
#[pyfunction]
fn topology_id(newick: &str, taxa: Vec<String>) -> PyResult<String> {
    let t = parse_newick(newick, &taxa).map_err(value_err)?;
    Ok(t.signature().id().to_string())
}

#[pyfunction]
fn robinson_foulds(a: &str, b: &str, taxa: Vec<String>) -> PyResult<usize> {
    let a = parse_newick(a, &taxa).map_err(value_err)?;
    let b = parse_newick(b, &taxa).map_err(value_err)?;
    Ok(core_rf(&a, &b))
}

const WIRE_KEYS: [&str; 11] = [
    "kind", "run", "iter", "particle", "word", "b", "p", "fitness", "topo", "msg", "v",
];

/// Encodes a message dict (keys `kind`, `run`, `iter`, `particle`, `word`,
/// `b`, `p`, `fitness`, `topo`, `msg`) as one length-prefixed frame.
#[pyfunction]
fn encode_message<'py>(py: Python<'py>, message: &Bound<'py, PyDict>) -> PyResult<Bound<'py, PyBytes>> {
    for key in message.keys() {
        let key: String = key.extract()?;
        if !WIRE_KEYS.contains(&key.as_str()) {
            return Err(PyKeyError::new_err(format!("unknown message key {key:?}")));
        }
    }
    let kind_text: String = message
        .get_item("kind")?
        .ok_or_else(|| PyKeyError::new_err("kind"))?
        .extract()?;
    let kind = Kind::ALL
        .into_iter()
        .find(|k| k.as_str().eq_ignore_ascii_case(&kind_text))
        .ok_or_else(|| PyValueError::new_err(format!("unknown kind {kind_text:?}")))?;
    let run: String = message.get_item("run")?.map(|v| v.extract()).transpose()?.unwrap_or_default();
    let mut m = WireMessage::new(kind, &run);
    if let Some(v) = message.get_item("iter")? {
        m.iteration = v.extract()?;
    }
    if let Some(v) = message.get_item("particle")? {
        m.particle_id = v.extract()?;
    }
    if let Some(v) = message.get_item("word")? {
        m.word = v.extract()?;
    }
    if let Some(v) = message.get_item("b")? {
        m.b = v.extract()?;
    }
    if let Some(v) = message.get_item("p")? {
        m.p = v.extract()?;
    }
    if let Some(v) = message.get_item("fitness")? {
        m.fitness = v.extract()?;
    }
    if let Some(v) = message.get_item("topo")? {
        m.topology_id = v.extract()?;
    }
    if let Some(v) = message.get_item("msg")? {
        m.message = v.extract()?;
    }
    if let Some(v) = message.get_item("v")? {
        m.protocol_version = v.extract()?;
    }
    let frame = encode_frame(&m).map_err(value_err)?;
    Ok(PyBytes::new(py, &frame))
}

/// Decodes one frame from the start of `data`. Returns the message dict and
/// the number of bytes consumed.
#[pyfunction]
fn decode_message<'py>(py: Python<'py>, data: &[u8]) -> PyResult<(Bound<'py, PyDict>, usize)> {
    let (m, used) = decode_frame(data).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("v", m.protocol_version)?;
    d.set_item("kind", m.kind.as_str())?;
    d.set_item("run", &m.run_id)?;
    d.set_item("iter", m.iteration)?;
    d.set_item("particle", m.particle_id)?;
    d.set_item("word", &m.word)?;
    d.set_item("b", m.b)?;
    d.set_item("p", m.p)?;
    d.set_item("fitness", m.fitness)?;
    d.set_item("topo", &m.topology_id)?;
    d.set_item("msg", &m.message)?;
    Ok((d, used))
}

/// Topology and per-swarm tables (aligned text) over ledger files.
#[pyfunction]
fn ledger_tables(paths: Vec<PathBuf>) -> PyResult<(String, String)> {
    let ledgers = paths
        .iter()
        .map(|p| RunLedger::load(p).map_err(|e| PyIOError::new_err(format!("{}: {e}", p.display()))))
        .collect::<PyResult<Vec<_>>>()?;
    Ok((
        topology_table(&ledgers).to_text(),
        best_per_swarm_table(&ledgers).to_text(),
    ))
}

#[pymodule]
#[pyo3(name = "phyloswarm")]
fn phyloswarm_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<FitnessReport>()?;
    m.add_class::<PlantedOracle>()?;
    m.add_class::<PhyloEvaluator>()?;
    m.add_function(wrap_pyfunction!(run_bpso, m)?)?;
    m.add_function(wrap_pyfunction!(run_ga, m)?)?;
    m.add_function(wrap_pyfunction!(combine_fitness, m)?)?;
    m.add_function(wrap_pyfunction!(percentage_ones, m)?)?;
    m.add_function(wrap_pyfunction!(sigmoid, m)?)?;
    m.add_function(wrap_pyfunction!(constriction_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(inertia, m)?)?;
    m.add_function(wrap_pyfunction!(neighbor_joining, m)?)?;
    m.add_function(wrap_pyfunction!(topology_id, m)?)?;
    m.add_function(wrap_pyfunction!(robinson_foulds, m)?)?;
    m.add_function(wrap_pyfunction!(encode_message, m)?)?;
    m.add_function(wrap_pyfunction!(decode_message, m)?)?;
    m.add_function(wrap_pyfunction!(ledger_tables, m)?)?;
    Ok(())
}
