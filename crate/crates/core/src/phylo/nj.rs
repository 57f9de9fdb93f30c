//! Saitou–Nei neighbor joining.

use super::distance::DistanceMatrix;
use super::topology::{Split, TopologySignature};
use super::PhyloError;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
    /// Bootstrap support in percent, for internal edges once computed.
    pub support: Option<f64>,
}

/// Unrooted tree. Nodes `0..n_taxa` are the leaves in taxon order; higher
/// node ids are unlabeled internal nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct UnrootedTree {
    taxa: Vec<String>,
    adjacency: Vec<Vec<(usize, usize)>>,
    edges: Vec<Edge>,
}

impl UnrootedTree {
    pub(crate) fn with_leaves(taxa: Vec<String>) -> Self {
        let n = taxa.len();
        Self {
            taxa,
            adjacency: vec![Vec::new(); n],
            edges: Vec::new(),
        }
    }

    pub(crate) fn add_node(&mut self) -> usize {
        self.adjacency.push(Vec::new());
        self.adjacency.len() - 1
    }

    pub(crate) fn add_edge(&mut self, a: usize, b: usize, length: f64, support: Option<f64>) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge {
            a,
            b,
            length,
            support,
        });
        self.adjacency[a].push((b, id));
        self.adjacency[b].push((a, id));
        id
    }

    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn n_taxa(&self) -> usize {
        self.taxa.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node < self.taxa.len()
    }

    pub fn is_internal_edge(&self, e: usize) -> bool {
        let edge = &self.edges[e];
        !self.is_leaf(edge.a) && !self.is_leaf(edge.b)
    }

    pub fn internal_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| self.is_internal_edge(e))
    }

    pub fn set_support(&mut self, e: usize, support: f64) {
        self.edges[e].support = Some(support);
    }

    /// Bipartition induced by every internal edge, as `(edge id, split)`.
    /// Splits are expressed as the side that does not contain leaf 0.
    pub fn splits(&self) -> Vec<(usize, Split)> {
        let n = self.n_taxa();
        let nodes = self.n_nodes();
        // iterative DFS from leaf 0, recording parent edges in visit order
        let mut parent_edge = vec![usize::MAX; nodes];
        let mut order = Vec::with_capacity(nodes);
        let mut visited = vec![false; nodes];
        let mut stack = vec![0usize];
        visited[0] = true;
        while let Some(u) = stack.pop() {
            order.push(u);
            for &(v, e) in &self.adjacency[u] {
                if !visited[v] {
                    visited[v] = true;
                    parent_edge[v] = e;
                    stack.push(v);
                }
            }
        }
        let mut below: Vec<Split> = (0..nodes).map(|_| Split::empty(n)).collect();
        for &u in order.iter().rev() {
            if self.is_leaf(u) && u != 0 {
                below[u].insert(u);
            }
            if parent_edge[u] != usize::MAX {
                let e = &self.edges[parent_edge[u]];
                let parent = if e.a == u { e.b } else { e.a };
                let child = below[u].clone();
                below[parent].union_with(&child);
            }
        }
        let mut out: Vec<(usize, Split)> = (0..nodes)
            .filter(|&u| parent_edge[u] != usize::MAX && self.is_internal_edge(parent_edge[u]))
            .map(|u| (parent_edge[u], below[u].clone()))
            .collect();
        out.sort_by_key(|(e, _)| *e);
        out
    }

    pub fn signature(&self) -> TopologySignature {
        let splits: Vec<Split> = self.splits().into_iter().map(|(_, s)| s).collect();
        TopologySignature::from_splits(&self.taxa, &splits)
    }

    pub fn supports(&self) -> Vec<f64> {
        self.internal_edges()
            .filter_map(|e| self.edges[e].support)
            .collect()
    }
}

/// Neighbor joining on `d`. At each step the pair minimizing
/// `Q(i,j) = (r − 2)·d(i,j) − R_i − R_j` is joined, with ties going to the
/// smallest `(i, j)` position pair. A negative branch length is set to zero
/// and its deficit moved to the sister branch.
pub fn neighbor_joining(d: &DistanceMatrix, taxa: &[String]) -> Result<UnrootedTree, PhyloError> {
    let n = taxa.len();
    if n < 3 {
        return Err(PhyloError::TooFewTaxa(n));
    }
    assert_eq!(d.len(), n, "distance matrix size must match taxa");

    let mut tree = UnrootedTree::with_leaves(taxa.to_vec());
    // working distances over node ids (leaves + internal nodes created so far)
    let cap = 2 * n;
    let mut dist = vec![0.0f64; cap * cap];
    for i in 0..n {
        for j in 0..n {
            dist[i * cap + j] = d.get(i, j);
        }
    }
    let at = |dist: &Vec<f64>, a: usize, b: usize| dist[a * cap + b];
    let mut active: Vec<usize> = (0..n).collect();

    while active.len() > 3 {
        let r = active.len();
        let sums: Vec<f64> = active
            .iter()
            .map(|&a| active.iter().map(|&b| at(&dist, a, b)).sum())
            .collect();
        let mut best = (0usize, 1usize);
        let mut best_q = f64::INFINITY;
        for i in 0..r {
            for j in i + 1..r {
                let q = (r as f64 - 2.0) * at(&dist, active[i], active[j]) - sums[i] - sums[j];
                if q < best_q {
                    best_q = q;
                    best = (i, j);
                }
            }
        }
        let (i, j) = best;
        let (a, b) = (active[i], active[j]);
        let dab = at(&dist, a, b);
        let mut la = 0.5 * dab + (sums[i] - sums[j]) / (2.0 * (r as f64 - 2.0));
        let mut lb = dab - la;
        if la < 0.0 {
            la = 0.0;
            lb = dab;
        } else if lb < 0.0 {
            lb = 0.0;
            la = dab;
        }
        let u = tree.add_node();
        tree.add_edge(u, a, la, None);
        tree.add_edge(u, b, lb, None);
        for &k in &active {
            if k != a && k != b {
                let v = 0.5 * (at(&dist, a, k) + at(&dist, b, k) - dab);
                dist[u * cap + k] = v;
                dist[k * cap + u] = v;
            }
        }
        active[i] = u;
        active.remove(j);
    }

    let (a, b, c) = (active[0], active[1], active[2]);
    let (dab, dac, dbc) = (at(&dist, a, b), at(&dist, a, c), at(&dist, b, c));
    let center = tree.add_node();
    for (node, len) in [
        (a, 0.5 * (dab + dac - dbc)),
        (b, 0.5 * (dab + dbc - dac)),
        (c, 0.5 * (dac + dbc - dab)),
    ] {
        tree.add_edge(center, node, len.max(0.0), None);
    }
    Ok(tree)
}
