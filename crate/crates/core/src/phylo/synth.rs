//! Synthetic alignments and trees with known answers.
//!
//! Alignments are built from "split columns": a column where every taxon on
//! one side of a bipartition carries one base and every other taxon a second
//! base. Distances computed from such columns are tree-additive, so
//! neighbor joining recovers the generating tree exactly.

use super::distance::DistanceMatrix;
use super::matrix::{GeneBlock, GeneMatrix};
use super::nj::UnrootedTree;
use crate::bits::BinaryPosition;
use crate::rng::RngStream;

const BASES: [u8; 4] = *b"ACGT";

#[derive(Debug, Clone)]
pub struct SplitSpec {
    /// Taxon indices carrying the minority base.
    pub side: Vec<usize>,
    pub columns: usize,
}

/// Rows for `n_taxa` taxa: the columns of every spec, then
/// `singleton_columns` columns per taxon where only that taxon differs.
pub fn split_columns(
    n_taxa: usize,
    specs: &[SplitSpec],
    singleton_columns: usize,
    seed: u64,
) -> Vec<Vec<u8>> {
    let mut rng = RngStream::master(seed);
    let mut rows = vec![Vec::new(); n_taxa];
    let mut push = |side: &[usize], rng: &mut RngStream| {
        let x = rng.below(4);
        let y = (x + 1 + rng.below(3)) % 4;
        for (t, row) in rows.iter_mut().enumerate() {
            row.push(if side.contains(&t) { BASES[x] } else { BASES[y] });
        }
    };
    for spec in specs {
        for _ in 0..spec.columns {
            push(&spec.side, &mut rng);
        }
    }
    for t in 0..n_taxa {
        for _ in 0..singleton_columns {
            push(&[t], &mut rng);
        }
    }
    rows
}

/// Layout of the one-discordant-gene fixture.
#[derive(Debug, Clone)]
pub struct BlurringParams {
    pub genes: usize,
    /// Columns per bipartition in each concordant gene.
    pub concordant_columns: usize,
    /// Columns per conflicting bipartition in the discordant gene.
    pub discordant_columns: usize,
    pub singleton_columns: usize,
}

impl Default for BlurringParams {
    fn default() -> Self {
        Self {
            genes: 10,
            concordant_columns: 6,
            discordant_columns: 50,
            singleton_columns: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlurringFixture {
    pub matrix: GeneMatrix,
    /// Bit index of the discordant gene.
    pub discordant: usize,
    /// All genes except the discordant one.
    pub target: BinaryPosition,
}

pub const FIXTURE_TAXA: usize = 8;

/// Eight taxa on `((t0,t1),(t2,t3)),((t4,t5),(t6,t7))`. Every gene but one
/// carries columns for all five internal bipartitions; the discordant gene
/// instead supports `{t0,t2}` and `{t1,t3}`, which conflict with `{t0,t1}`
/// and `{t2,t3}`. The discordant gene's position depends on `seed`.
pub fn blurring_fixture(params: &BlurringParams, seed: u64) -> BlurringFixture {
    let taxa: Vec<String> = (0..FIXTURE_TAXA).map(|i| format!("taxon{i}")).collect();
    let concordant = [
        vec![0, 1],
        vec![2, 3],
        vec![4, 5],
        vec![6, 7],
        vec![0, 1, 2, 3],
    ];
    let conflicting = [vec![0, 2], vec![1, 3]];
    let discordant = (seed % params.genes as u64) as usize;
    let genes = (0..params.genes)
        .map(|g| {
            let sides: &[Vec<usize>] = if g == discordant {
                &conflicting
            } else {
                &concordant
            };
            let columns = if g == discordant {
                params.discordant_columns
            } else {
                params.concordant_columns
            };
            let specs: Vec<SplitSpec> = sides
                .iter()
                .map(|s| SplitSpec {
                    side: s.clone(),
                    columns,
                })
                .collect();
            GeneBlock {
                name: format!("gene{g:02}"),
                rows: split_columns(
                    FIXTURE_TAXA,
                    &specs,
                    params.singleton_columns,
                    seed.wrapping_mul(31).wrapping_add(g as u64),
                ),
            }
        })
        .collect();
    let matrix = GeneMatrix::new(taxa, genes, Some("taxon7")).expect("fixture is well-formed");
    let mut target = BinaryPosition::ones(params.genes);
    target.set(discordant, false);
    BlurringFixture {
        matrix,
        discordant,
        target,
    }
}

/// Fixture where every gene is concordant.
pub fn concordant_fixture(genes: usize, seed: u64) -> GeneMatrix {
    let params = BlurringParams {
        genes: genes + 1,
        ..BlurringParams::default()
    };
    // build with one extra gene and drop the discordant one
    let fx = blurring_fixture(&params, seed);
    let kept: Vec<GeneBlock> = fx
        .matrix
        .genes()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != fx.discordant)
        .map(|(_, g)| g.clone())
        .collect();
    GeneMatrix::new(fx.matrix.taxa().to_vec(), kept, Some("taxon7")).expect("fixture is well-formed")
}

/// Random binary tree on `n` leaves by stepwise edge subdivision, branch
/// lengths uniform on `[min_len, max_len]`, with its path-length matrix.
pub fn random_additive_tree(
    n: usize,
    min_len: f64,
    max_len: f64,
    rng: &mut RngStream,
) -> (UnrootedTree, DistanceMatrix) {
    assert!(n >= 3);
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let center = n;
    for leaf in 0..3 {
        edges.push((center, leaf, rng.uniform(min_len, max_len)));
    }
    let mut next_internal = n + 1;
    for leaf in 3..n {
        let pick = rng.below(edges.len());
        let (a, b, _) = edges.swap_remove(pick);
        let m = next_internal;
        next_internal += 1;
        edges.push((a, m, rng.uniform(min_len, max_len)));
        edges.push((m, b, rng.uniform(min_len, max_len)));
        edges.push((m, leaf, rng.uniform(min_len, max_len)));
    }
    let taxa: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
    let mut tree = UnrootedTree::with_leaves(taxa);
    while tree.n_nodes() < next_internal {
        tree.add_node();
    }
    for (a, b, l) in edges {
        tree.add_edge(a, b, l, None);
    }
    let d = path_lengths(&tree);
    (tree, d)
}

/// Leaf-to-leaf path lengths.
pub fn path_lengths(tree: &UnrootedTree) -> DistanceMatrix {
    let n = tree.n_taxa();
    let mut d = DistanceMatrix::zeros(n);
    for src in 0..n {
        let mut dist = vec![f64::NAN; tree.n_nodes()];
        dist[src] = 0.0;
        let mut stack = vec![src];
        while let Some(u) = stack.pop() {
            for &(v, e) in tree.neighbors(u) {
                if dist[v].is_nan() {
                    dist[v] = dist[u] + tree.edges()[e].length;
                    stack.push(v);
                }
            }
        }
        for (dst, &v) in dist.iter().enumerate().take(src) {
            d.set(src, dst, v);
        }
    }
    d
}
