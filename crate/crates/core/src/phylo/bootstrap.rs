use std::collections::HashSet;

use rayon::prelude::*;

use super::distance::{distance_matrix, weighted_distance_matrix, GapMode};
use super::matrix::Alignment;
use super::nj::{neighbor_joining, UnrootedTree};
use super::topology::Split;
use super::PhyloError;
use crate::rng::RngStream;

/// `100 · hits / total` rounded half-up to an integer percent.
pub fn round_support(hits: usize, total: usize) -> f64 {
    assert!(total > 0);
    ((200 * hits + total) / (2 * total)) as f64
}

/// Column-resampling bootstrap. The reference tree is NJ on the full block;
/// each replicate draws `width` columns with replacement from its own
/// substream (`seed`, replicate index) and reruns NJ. An internal edge's
/// support is the share of replicate trees containing its bipartition.
pub fn bootstrap_support(
    block: &Alignment,
    replicates: usize,
    seed: u64,
    gap_mode: GapMode,
) -> Result<UnrootedTree, PhyloError> {
    assert!(replicates >= 1, "need at least one bootstrap replicate");
    let width = block.width();
    if width == 0 {
        return Err(PhyloError::EmptySubset);
    }
    let mut tree = neighbor_joining(&distance_matrix(block, gap_mode), &block.taxa)?;
    let reference = tree.splits();

    let hits = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(seed, r as u64);
            let mut weights = vec![0u32; width];
            for _ in 0..width {
                weights[rng.below(width)] += 1;
            }
            let d = weighted_distance_matrix(block, &weights, gap_mode);
            let rep = neighbor_joining(&d, &block.taxa)?;
            let found: HashSet<Split> = rep.splits().into_iter().map(|(_, s)| s).collect();
            Ok(reference
                .iter()
                .map(|(_, s)| usize::from(found.contains(s)))
                .collect::<Vec<usize>>())
        })
        .try_reduce(
            || vec![0usize; reference.len()],
            |mut acc, v| {
                for (a, b) in acc.iter_mut().zip(v) {
                    *a += b;
                }
                Ok(acc)
            },
        )?;

    for ((edge, _), h) in reference.iter().zip(hits) {
        tree.set_support(*edge, round_support(h, replicates));
    }
    Ok(tree)
}

/// Minimum support over internal edges; 100 when there is none.
pub fn lowest_support(t: &UnrootedTree) -> f64 {
    t.internal_edges()
        .map(|e| t.edges()[e].support.unwrap_or(0.0))
        .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.min(s))))
        .unwrap_or(100.0)
}
