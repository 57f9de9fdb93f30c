//! Evaluator abstraction, the planted-optimum oracle and the memo cache.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use indexmap::IndexMap;
use thiserror::Error;

use crate::bits::{BinaryPosition, BitsError, FitnessReport, PMode};
use crate::phylo::PhyloError;
use crate::rng::{derive_seed, stable_hash64, RngStream};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error(transparent)]
    Phylo(#[from] PhyloError),
    #[error("external evaluator: {0}")]
    External(String),
    #[error("remote evaluation: {0}")]
    Remote(String),
    #[error("cache file line {line}: {reason}")]
    CacheFormat { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Scores binary words. Implementations must be pure: the same word always
/// yields the same report, even when called concurrently.
pub trait FitnessEvaluator: Send + Sync {
    fn evaluate(&self, w: &BinaryPosition) -> Result<FitnessReport, EvalError>;

    fn instance_size(&self) -> usize;
}

impl<E: FitnessEvaluator + ?Sized> FitnessEvaluator for Arc<E> {
    fn evaluate(&self, w: &BinaryPosition) -> Result<FitnessReport, EvalError> {
        (**self).evaluate(w)
    }

    fn instance_size(&self) -> usize {
        (**self).instance_size()
    }
}

impl<E: FitnessEvaluator + ?Sized> FitnessEvaluator for &E {
    fn evaluate(&self, w: &BinaryPosition) -> Result<FitnessReport, EvalError> {
        (**self).evaluate(w)
    }

    fn instance_size(&self) -> usize {
        (**self).instance_size()
    }
}

impl<E: FitnessEvaluator + ?Sized> FitnessEvaluator for Box<E> {
    fn evaluate(&self, w: &BinaryPosition) -> Result<FitnessReport, EvalError> {
        (**self).evaluate(w)
    }

    fn instance_size(&self) -> usize {
        (**self).instance_size()
    }
}

pub(crate) fn check_dimension(expected: usize, w: &BinaryPosition) -> Result<(), BitsError> {
    if w.len() == expected {
        Ok(())
    } else {
        Err(BitsError::DimensionMismatch {
            expected,
            got: w.len(),
        })
    }
}

/// Synthetic landscape with a known optimum: `b` falls linearly with the
/// Hamming distance to the planted word.
#[derive(Debug, Clone)]
pub struct PlantedOracle {
    pub planted: BinaryPosition,
    pub noise_amplitude: f64,
    pub seed: u64,
    pub p_mode: PMode,
}

impl PlantedOracle {
    pub fn new(planted: BinaryPosition) -> Self {
        Self {
            planted,
            noise_amplitude: 0.0,
            seed: 0,
            p_mode: PMode::Percent,
        }
    }

    pub fn with_noise(mut self, amplitude: f64, seed: u64) -> Self {
        self.noise_amplitude = amplitude;
        self.seed = seed;
        self
    }

    pub fn with_p_mode(mut self, mode: PMode) -> Self {
        self.p_mode = mode;
        self
    }

    /// Noise is a function of (seed, word) only.
    fn noise(&self, w: &BinaryPosition) -> f64 {
        if self.noise_amplitude == 0.0 {
            return 0.0;
        }
        let key = stable_hash64(w.to_string().as_bytes());
        let mut rng = RngStream::master(derive_seed(self.seed, key, 0));
        rng.uniform(-self.noise_amplitude, self.noise_amplitude)
    }
}

pub fn evaluate_planted(
    oracle: &PlantedOracle,
    w: &BinaryPosition,
) -> Result<FitnessReport, EvalError> {
    let n = oracle.planted.len();
    check_dimension(n, w)?;
    let distance = oracle.planted.hamming(w)?;
    let b = (100.0 - (100.0 / n as f64) * distance as f64 + oracle.noise(w)).clamp(0.0, 100.0);
    let p = oracle.p_mode.p_value(w)?;
    Ok(FitnessReport::new(b, p, None)?)
}

impl FitnessEvaluator for PlantedOracle {
    fn evaluate(&self, w: &BinaryPosition) -> Result<FitnessReport, EvalError> {
        evaluate_planted(self, w)
    }

    fn instance_size(&self) -> usize {
        self.planted.len()
    }
}

/// Same report for every word of the right length.
#[derive(Debug, Clone)]
pub struct ConstantEvaluator {
    pub n: usize,
    pub report: FitnessReport,
}

impl FitnessEvaluator for ConstantEvaluator {
    fn evaluate(&self, w: &BinaryPosition) -> Result<FitnessReport, EvalError> {
        check_dimension(self.n, w)?;
        Ok(self.report.clone())
    }

    fn instance_size(&self) -> usize {
        self.n
    }
}

/// Reports keyed by the canonical text of the word, in insertion order.
#[derive(Debug, Default)]
pub struct MemoCache {
    entries: Mutex<IndexMap<String, FitnessReport>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl MemoCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, w: &BinaryPosition) -> Option<FitnessReport> {
        self.entries.lock().unwrap().get(&w.to_string()).cloned()
    }

    /// First insert wins; a later insert for the same word is ignored.
    pub fn insert(&self, w: &BinaryPosition, report: FitnessReport) {
        self.entries
            .lock()
            .unwrap()
            .entry(w.to_string())
            .or_insert(report);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    /// One record per line: `<word> <b> <p> <fitness> <topology-id>`, with
    /// `-` for an absent topology.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (word, r) in self.entries.lock().unwrap().iter() {
            let topo = r.topology.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
            writeln!(out, "{word} {} {} {} {topo}", r.b, r.p, r.fitness)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self, EvalError> {
        let cache = Self::new();
        {
            let mut entries = cache.entries.lock().unwrap();
            for (idx, line) in input.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let bad = |reason: &str| EvalError::CacheFormat {
                    line: idx + 1,
                    reason: reason.to_owned(),
                };
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != 5 {
                    return Err(bad("expected 5 fields"));
                }
                let word: BinaryPosition = fields[0].parse().map_err(|_| bad("bad word"))?;
                let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
                let topology = match fields[4] {
                    "-" => None,
                    t => Some(t.parse().map_err(|_| bad("bad topology id"))?),
                };
                let report = FitnessReport {
                    b: num(fields[1])?,
                    p: num(fields[2])?,
                    fitness: num(fields[3])?,
                    topology,
                };
                entries.insert(word.to_string(), report);
            }
        }
        Ok(cache)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        Self::read_from(BufReader::new(fs::File::open(path)?))
    }
}

pub fn evaluate_memoized(
    cache: &MemoCache,
    ev: &dyn FitnessEvaluator,
    w: &BinaryPosition,
) -> Result<FitnessReport, EvalError> {
    if let Some(hit) = cache.get(w) {
        cache.hits.fetch_add(1, Ordering::Relaxed);
        return Ok(hit);
    }
    cache.misses.fetch_add(1, Ordering::Relaxed);
    let report = ev.evaluate(w)?;
    cache.insert(w, report.clone());
    Ok(report)
}

/// An evaluator wrapped with a shared memo cache.
pub struct Memoized<E> {
    inner: E,
    cache: Arc<MemoCache>,
}

impl<E: FitnessEvaluator> Memoized<E> {
    pub fn new(inner: E) -> Self {
        Self::with_cache(inner, Arc::new(MemoCache::new()))
    }

    pub fn with_cache(inner: E, cache: Arc<MemoCache>) -> Self {
        Self { inner, cache }
    }

    pub fn cache(&self) -> &Arc<MemoCache> {
        &self.cache
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: FitnessEvaluator> FitnessEvaluator for Memoized<E> {
    fn evaluate(&self, w: &BinaryPosition) -> Result<FitnessReport, EvalError> {
        evaluate_memoized(&self.cache, &self.inner, w)
    }

    fn instance_size(&self) -> usize {
        self.inner.instance_size()
    }
}

/// Counts calls to the wrapped evaluator.
pub struct Counting<E> {
    inner: E,
    calls: AtomicUsize,
}

impl<E> Counting<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<E: FitnessEvaluator> FitnessEvaluator for Counting<E> {
    fn evaluate(&self, w: &BinaryPosition) -> Result<FitnessReport, EvalError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(w)
    }

    fn instance_size(&self) -> usize {
        self.inner.instance_size()
    }
}

/// Exhaustive maximum of an evaluator over all `2^n` words (`n <= 24`).
/// Returns the best fitness and the lowest word attaining it.
pub fn brute_force_optimum(
    ev: &dyn FitnessEvaluator,
) -> Result<(BinaryPosition, FitnessReport), EvalError> {
    let n = ev.instance_size();
    assert!(n <= 24, "brute force limited to 24 bits");
    let mut best: Option<(BinaryPosition, FitnessReport)> = None;
    for code in 0u32..(1u32 << n) {
        let bits: Vec<bool> = (0..n).map(|j| code >> (n - 1 - j) & 1 == 1).collect();
        let w = BinaryPosition::from_bools(&bits);
        let r = ev.evaluate(&w)?;
        if best.as_ref().is_none_or(|(_, b)| r.fitness > b.fitness) {
            best = Some((w, r));
        }
    }
    Ok(best.expect("at least one word"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(s: &str) -> BinaryPosition {
        s.parse().unwrap()
    }

    #[test]
    fn planted_examples() {
        let o = PlantedOracle::new(word("1101001011"));
        assert_eq!(o.evaluate(&word("1101001011")).unwrap().b, 100.0);
        assert_eq!(o.evaluate(&word("0010110100")).unwrap().b, 0.0);

        let o = PlantedOracle::new(BinaryPosition::ones(10));
        let r = o.evaluate(&word("1101101011")).unwrap();
        assert!((r.b - 70.0).abs() < 1e-12);
        assert!((r.p - 70.0).abs() < 1e-12);
        assert_eq!(r.fitness, (r.b + r.p) / 2.0);
    }

    #[test]
    fn planted_dimension_mismatch() {
        let o = PlantedOracle::new(BinaryPosition::ones(10));
        assert!(matches!(
            o.evaluate(&BinaryPosition::ones(9)),
            Err(EvalError::Bits(BitsError::DimensionMismatch { .. }))
        ));
    }

    #[test]
    fn planted_noise_is_pure_and_bounded() {
        let o = PlantedOracle::new(BinaryPosition::ones(12)).with_noise(3.0, 42);
        let w = word("110011001100");
        let a = o.evaluate(&w).unwrap();
        let b = o.evaluate(&w).unwrap();
        assert_eq!(a, b);
        assert!((a.b - 50.0).abs() <= 3.0);
    }

    #[test]
    fn all_ones_planted_is_unique_maximum() {
        let o = PlantedOracle::new(BinaryPosition::ones(8));
        let (w, r) = brute_force_optimum(&o).unwrap();
        assert_eq!(w, BinaryPosition::ones(8));
        assert_eq!(r.fitness, 100.0);
        let mut strictly_below = 0;
        for code in 0u32..255 {
            let bits: Vec<bool> = (0..8).map(|j| code >> j & 1 == 1).collect();
            let f = o.evaluate(&BinaryPosition::from_bools(&bits)).unwrap().fitness;
            assert!(f < 100.0);
            strictly_below += 1;
        }
        assert_eq!(strictly_below, 255);
    }

    // Hamming-1 neighbors of the noiseless oracle differ by at most 100/N.
    #[test]
    fn hamming_neighbor_lipschitz_bound() {
        let n = 10;
        let o = PlantedOracle::new(word("1011001110"));
        let bound = 100.0 / n as f64 + 1e-9;
        for code in 0u32..(1 << n) {
            let bits: Vec<bool> = (0..n).map(|j| code >> j & 1 == 1).collect();
            let w = BinaryPosition::from_bools(&bits);
            let f = o.evaluate(&w).unwrap().fitness;
            for j in 0..n {
                let mut v = w.clone();
                v.flip(j);
                let g = o.evaluate(&v).unwrap().fitness;
                assert!((f - g).abs() <= bound);
            }
        }
    }

    #[test]
    fn memo_hits_skip_evaluator() {
        let inner = Counting::new(PlantedOracle::new(BinaryPosition::ones(5)));
        let memo = Memoized::new(&inner);
        let w = word("11010");
        let a = memo.evaluate(&w).unwrap();
        let b = memo.evaluate(&w).unwrap();
        assert_eq!(a, b);
        assert_eq!(inner.calls(), 1);
        assert_eq!(memo.cache().hits(), 1);

        memo.evaluate(&word("10110")).unwrap();
        assert_eq!(inner.calls(), 2);
        assert_eq!(memo.cache().misses(), 2);
    }

    #[test]
    fn memo_is_transparent() {
        let o = PlantedOracle::new(word("10110")).with_noise(2.0, 9);
        let memo = Memoized::new(o.clone());
        let words = ["10110", "00000", "10110", "11111", "00000", "01011"];
        for s in words {
            assert_eq!(memo.evaluate(&word(s)).unwrap(), o.evaluate(&word(s)).unwrap());
        }
    }

    #[test]
    fn cache_persist_round_trip() {
        let memo = Memoized::new(PlantedOracle::new(word("1011")).with_noise(1.5, 3));
        for s in ["1011", "0000", "1111", "0110"] {
            memo.evaluate(&word(s)).unwrap();
        }
        let mut cache = memo.cache().get(&word("1111")).unwrap();
        cache.topology = Some(crate::TopologyId(0xabc));
        memo.cache().entries.lock().unwrap().insert("0001".into(), cache);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.txt");
        memo.cache().save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("1011 "));
        assert!(text.lines().last().unwrap().ends_with(" 0000000000000abc"));

        let loaded = MemoCache::load(&path).unwrap();
        assert_eq!(loaded.len(), 5);
        for s in ["1011", "0000", "1111", "0110", "0001"] {
            assert_eq!(loaded.get(&word(s)), memo.cache().get(&word(s)));
        }
    }

    #[test]
    fn cache_rejects_malformed_line() {
        let err = MemoCache::read_from("1011 1 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, EvalError::CacheFormat { line: 1, .. }));
    }
}
