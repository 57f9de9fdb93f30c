//! Positions, velocities and scores shared by every optimizer.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BitsError {
    #[error("instance size must be at least 1")]
    EmptyInstance,
    #[error("value {value} for {name} is outside [0, 100]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("invalid character {0:?} in binary word")]
    BadBit(char),
    #[error("invalid topology id {0:?}")]
    BadTopologyId(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A subset of `N` items as a packed bit word. Bit `j` is item `j` in the
/// instance's frozen (lexicographic) item order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryPosition {
    len: usize,
    words: Vec<u64>,
}

impl BinaryPosition {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut w = Self::zeros(len);
        for j in 0..len {
            w.set(j, true);
        }
        w
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut w = Self::zeros(bits.len());
        for (j, &b) in bits.iter().enumerate() {
            w.set(j, b);
        }
        w
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        assert!(j < self.len, "bit index {j} out of range {}", self.len);
        self.words[j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, j: usize, value: bool) {
        assert!(j < self.len, "bit index {j} out of range {}", self.len);
        let mask = 1u64 << (j % 64);
        if value {
            self.words[j / 64] |= mask;
        } else {
            self.words[j / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, j: usize) {
        let v = self.get(j);
        self.set(j, !v);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |j| self.get(j))
    }

    /// Indices of the set bits, ascending.
    pub fn selected(&self) -> Vec<usize> {
        (0..self.len).filter(|&j| self.get(j)).collect()
    }

    pub fn ones_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> Self {
        let mut w = self.clone();
        for j in 0..self.len {
            w.flip(j);
        }
        w
    }

    pub fn hamming(&self, other: &Self) -> Result<usize, BitsError> {
        check_len(self.len, other.len)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), BitsError> {
    if expected == got {
        Ok(())
    } else {
        Err(BitsError::DimensionMismatch { expected, got })
    }
}

/// Lexicographic over bit indices, so it agrees with comparing the text form.
impl Ord for BinaryPosition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for BinaryPosition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BinaryPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for BinaryPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryPosition({self})")
    }
}

impl FromStr for BinaryPosition {
    type Err = BitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitsError::BadBit(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_bools(&bits))
    }
}

pub fn ones_count(w: &BinaryPosition) -> usize {
    w.ones_count()
}

pub fn percentage_ones(w: &BinaryPosition) -> Result<f64, BitsError> {
    if w.is_empty() {
        return Err(BitsError::EmptyInstance);
    }
    Ok(100.0 * w.ones_count() as f64 / w.len() as f64)
}

/// `(b + p) / 2`, with both inputs required in `[0, 100]`.
pub fn combine_fitness(b: f64, p: f64) -> Result<f64, BitsError> {
    for (name, value) in [("b", b), ("p", p)] {
        if !(0.0..=100.0).contains(&value) {
            return Err(BitsError::OutOfRange { name, value });
        }
    }
    Ok((b + p) / 2.0)
}

/// How `p` is measured: percentage of selected items or the raw count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PMode {
    #[default]
    Percent,
    Count,
}

impl PMode {
    pub fn p_value(self, w: &BinaryPosition) -> Result<f64, BitsError> {
        match self {
            PMode::Percent => percentage_ones(w),
            PMode::Count => {
                if w.is_empty() {
                    Err(BitsError::EmptyInstance)
                } else {
                    Ok(w.ones_count() as f64)
                }
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PMode::Percent => "percent",
            PMode::Count => "count",
        }
    }
}

impl FromStr for PMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "percent" => Ok(PMode::Percent),
            "count" => Ok(PMode::Count),
            other => Err(format!("unknown p_mode {other:?} (expected percent|count)")),
        }
    }
}

impl fmt::Display for PMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Stable 64-bit identity of an unrooted topology. Printed as 16 hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TopologyId(pub u64);

impl fmt::Display for TopologyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for TopologyId {
    type Err = BitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        u64::from_str_radix(s, 16)
            .map(TopologyId)
            .map_err(|_| BitsError::BadTopologyId(s.to_owned()))
    }
}

/// Score bundle for one evaluated word.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessReport {
    pub b: f64,
    pub p: f64,
    pub fitness: f64,
    pub topology: Option<TopologyId>,
}

impl FitnessReport {
    pub fn new(b: f64, p: f64, topology: Option<TopologyId>) -> Result<Self, BitsError> {
        let fitness = combine_fitness(b, p)?;
        Ok(Self {
            b,
            p,
            fitness,
            topology,
        })
    }

    pub fn zero() -> Self {
        Self {
            b: 0.0,
            p: 0.0,
            fitness: 0.0,
            topology: None,
        }
    }

    /// `topology_id` column text: hex id or empty.
    pub fn topology_text(&self) -> String {
        self.topology.map(|t| t.to_string()).unwrap_or_default()
    }
}

/// Real-valued per-coordinate velocity. Values are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityVector(Vec<f64>);

impl VelocityVector {
    /// Panics on a non-finite value.
    pub fn new(values: Vec<f64>) -> Self {
        assert!(
            values.iter().all(|v| v.is_finite()),
            "velocity must be finite"
        );
        Self(values)
    }

    pub fn try_new(values: Vec<f64>) -> Option<Self> {
        values.iter().all(|v| v.is_finite()).then_some(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub id: usize,
    pub position: BinaryPosition,
    pub velocity: VelocityVector,
    pub personal_best_position: BinaryPosition,
    pub personal_best_report: FitnessReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub particles: Vec<Particle>,
    pub global_best_position: BinaryPosition,
    pub global_best_report: FitnessReport,
    pub iteration: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn word(s: &str) -> BinaryPosition {
        s.parse().unwrap()
    }

    #[test]
    fn ones_count_cases() {
        assert_eq!(ones_count(&BinaryPosition::zeros(82)), 0);
        assert_eq!(ones_count(&BinaryPosition::ones(82)), 82);
        assert_eq!(ones_count(&word("10110")), 3);
    }

    #[test]
    fn percentage_cases() {
        let mut w = BinaryPosition::zeros(82);
        for j in 0..63 {
            w.set(j, true);
        }
        assert!((percentage_ones(&w).unwrap() - 76.82926829268293).abs() < 1e-12);
        assert_eq!(percentage_ones(&BinaryPosition::ones(82)).unwrap(), 100.0);
        assert_eq!(percentage_ones(&BinaryPosition::zeros(82)).unwrap(), 0.0);
        assert_eq!(
            percentage_ones(&BinaryPosition::zeros(0)),
            Err(BitsError::EmptyInstance)
        );
    }

    #[test]
    fn combine_reproduces_table_rows() {
        assert_eq!(combine_fitness(92.0, 63.0).unwrap(), 77.5);
        assert_eq!(combine_fitness(89.0, 30.0).unwrap(), 59.5);
        assert_eq!(combine_fitness(76.0, 67.0).unwrap(), 71.5);
    }

    #[test]
    fn combine_rejects_out_of_range() {
        assert!(matches!(
            combine_fitness(101.0, 3.0),
            Err(BitsError::OutOfRange { name: "b", .. })
        ));
        assert!(matches!(
            combine_fitness(1.0, -0.5),
            Err(BitsError::OutOfRange { name: "p", .. })
        ));
        assert!(combine_fitness(f64::NAN, 3.0).is_err());
    }

    #[test]
    fn text_form_and_order() {
        let w = word("0110");
        assert_eq!(w.to_string(), "0110");
        assert!(word("0111") > word("0110"));
        assert!(word("1000") > word("0111"));
        assert_eq!(
            "01a".parse::<BinaryPosition>(),
            Err(BitsError::BadBit('a'))
        );
        assert_eq!(word("1100").hamming(&word("1010")).unwrap(), 2);
        assert!(word("11").hamming(&word("110")).is_err());
    }

    #[test]
    fn packing_crosses_word_boundary() {
        let mut w = BinaryPosition::zeros(130);
        w.set(63, true);
        w.set(64, true);
        w.set(129, true);
        assert_eq!(w.ones_count(), 3);
        assert_eq!(w.selected(), vec![63, 64, 129]);
        assert_eq!(w.complement().ones_count(), 127);
    }

    #[test]
    fn topology_id_hex() {
        let t = TopologyId(0xdead_beef);
        assert_eq!(t.to_string(), "00000000deadbeef");
        assert_eq!("00000000deadbeef".parse::<TopologyId>().unwrap(), t);
    }

    proptest! {
        #[test]
        fn text_round_trip(bits in proptest::collection::vec(any::<bool>(), 0..200)) {
            let w = BinaryPosition::from_bools(&bits);
            let back: BinaryPosition = w.to_string().parse().unwrap();
            prop_assert_eq!(back, w);
        }

        #[test]
        fn fitness_strictly_monotone(b in 0.0..99.0f64, p in 0.0..99.0f64, d in 0.01..1.0f64) {
            let f = combine_fitness(b, p).unwrap();
            prop_assert!(combine_fitness(b + d, p).unwrap() > f);
            prop_assert!(combine_fitness(b, p + d).unwrap() > f);
            prop_assert!(f >= b.min(p) && f <= b.max(p));
        }
    }
}
