use std::str::FromStr;

use super::matrix::Alignment;

/// How gaps are treated when comparing two rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapMode {
    /// Compare only columns where both rows are non-gap.
    #[default]
    Pairwise,
    /// Drop every column that has a gap in any row.
    Complete,
}

impl FromStr for GapMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pairwise" => Ok(GapMode::Pairwise),
            "complete" => Ok(GapMode::Complete),
            other => Err(format!("unknown gap mode {other:?} (expected pairwise|complete)")),
        }
    }
}

/// Symmetric matrix with an exact zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// From a full square table. Panics unless symmetric with zero diagonal.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut d = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "distance table must be square");
            assert_eq!(row[i], 0.0, "diagonal must be zero");
            for (j, &v) in row.iter().enumerate().take(i) {
                assert_eq!(v, rows[j][i], "distance table must be symmetric");
                d.set(i, j, v);
            }
        }
        d
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        if i == j {
            return;
        }
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    /// Reorders rows and columns: new index `k` is old index `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut d = Self::zeros(self.n);
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                d.data[a * self.n + b] = self.get(i, j);
            }
        }
        d
    }
}

fn gap(c: u8) -> bool {
    c == b'-'
}

/// Proportion of differing sites among columns where both rows are non-gap;
/// 0 when there is no comparable column.
pub fn p_distance(block: &Alignment, i: usize, j: usize) -> f64 {
    let (mut comparable, mut differ) = (0usize, 0usize);
    for (&a, &b) in block.rows[i].iter().zip(&block.rows[j]) {
        if gap(a) || gap(b) {
            continue;
        }
        comparable += 1;
        if a != b {
            differ += 1;
        }
    }
    if comparable == 0 {
        0.0
    } else {
        differ as f64 / comparable as f64
    }
}

fn usable_columns(block: &Alignment, mode: GapMode) -> Vec<bool> {
    (0..block.width())
        .map(|c| match mode {
            GapMode::Pairwise => true,
            GapMode::Complete => block.column(c).all(|x| !gap(x)),
        })
        .collect()
}

pub fn distance_matrix(block: &Alignment, mode: GapMode) -> DistanceMatrix {
    let weights = vec![1u32; block.width()];
    weighted_distance_matrix(block, &weights, mode)
}

/// p-distances where column `c` counts `weights[c]` times (bootstrap
/// resampling expressed as column multiplicities).
pub fn weighted_distance_matrix(block: &Alignment, weights: &[u32], mode: GapMode) -> DistanceMatrix {
    assert_eq!(weights.len(), block.width());
    let usable = usable_columns(block, mode);
    let n = block.n_taxa();
    let mut d = DistanceMatrix::zeros(n);
    for i in 0..n {
        for j in 0..i {
            let (mut comparable, mut differ) = (0u64, 0u64);
            let (ri, rj) = (&block.rows[i], &block.rows[j]);
            for c in 0..weights.len() {
                let w = weights[c] as u64;
                if w == 0 || !usable[c] || gap(ri[c]) || gap(rj[c]) {
                    continue;
                }
                comparable += w;
                if ri[c] != rj[c] {
                    differ += w;
                }
            }
            let v = if comparable == 0 {
                0.0
            } else {
                differ as f64 / comparable as f64
            };
            d.set(i, j, v);
        }
    }
    d
}
