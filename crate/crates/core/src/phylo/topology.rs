use std::collections::BTreeSet;

use crate::bits::TopologyId;
use crate::rng::stable_hash64;

use super::nj::UnrootedTree;

/// Set of leaf indices on one side of an edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Split {
    bits: Vec<u64>,
}

impl Split {
    pub fn empty(n: usize) -> Self {
        Self {
            bits: vec![0; n.div_ceil(64)],
        }
    }

    pub fn insert(&mut self, leaf: usize) {
        self.bits[leaf / 64] |= 1 << (leaf % 64);
    }

    pub fn contains(&self, leaf: usize) -> bool {
        self.bits[leaf / 64] >> (leaf % 64) & 1 == 1
    }

    pub fn union_with(&mut self, other: &Split) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn leaves(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|&i| self.contains(i)).collect()
    }
}

/// Canonical identity of an unrooted topology: the sorted set of its
/// non-trivial bipartitions, each written as the lexicographically smaller
/// of its two sorted taxon lists.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TopologySignature {
    taxa: Vec<String>,
    splits: Vec<Vec<String>>,
    id: TopologyId,
}

impl TopologySignature {
    /// `splits` are leaf-index sets over `taxa`; trivial ones are dropped.
    pub fn from_splits(taxa: &[String], splits: &[Split]) -> Self {
        let n = taxa.len();
        let mut sorted_taxa = taxa.to_vec();
        sorted_taxa.sort();
        let mut set = BTreeSet::new();
        for s in splits {
            let k = s.len();
            if k < 2 || k + 2 > n {
                continue;
            }
            let mut inside: Vec<String> = Vec::with_capacity(k);
            let mut outside: Vec<String> = Vec::with_capacity(n - k);
            for (i, t) in taxa.iter().enumerate() {
                if s.contains(i) {
                    inside.push(t.clone());
                } else {
                    outside.push(t.clone());
                }
            }
            inside.sort();
            outside.sort();
            set.insert(inside.min(outside));
        }
        let splits: Vec<Vec<String>> = set.into_iter().collect();
        let canonical = format!(
            "{};{}",
            sorted_taxa.join(","),
            splits
                .iter()
                .map(|s| s.join(","))
                .collect::<Vec<_>>()
                .join("|")
        );
        let id = TopologyId(stable_hash64(canonical.as_bytes()));
        Self {
            taxa: sorted_taxa,
            splits,
            id,
        }
    }

    pub fn splits(&self) -> &[Vec<String>] {
        &self.splits
    }

    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn id(&self) -> TopologyId {
        self.id
    }
}

/// Number of bipartitions present in exactly one of the two trees.
pub fn robinson_foulds(a: &UnrootedTree, b: &UnrootedTree) -> usize {
    let sa = a.signature();
    let sb = b.signature();
    let x: BTreeSet<_> = sa.splits().iter().collect();
    let y: BTreeSet<_> = sb.splits().iter().collect();
    x.symmetric_difference(&y).count()
}
