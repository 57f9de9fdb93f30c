//! Phylogenetic fitness: concatenate the selected gene blocks, build a
//! neighbor-joining tree from p-distances, and score it by the lowest
//! bootstrap support of its internal edges.

use std::io;
use std::path::PathBuf;

use thiserror::Error;

mod bootstrap;
mod distance;
mod evaluator;
mod matrix;
mod newick;
mod nj;
pub mod synth;
mod topology;

pub use bootstrap::{bootstrap_support, lowest_support, round_support};
pub use distance::{distance_matrix, p_distance, weighted_distance_matrix, DistanceMatrix, GapMode};
pub use evaluator::{evaluate_phylo, infer_tree, ExternalCommand, PhyloEvaluator, PhyloSettings};
pub use matrix::{concat_subset, load_gene_matrix, parse_fasta, parse_partitions, Alignment, GeneBlock, GeneMatrix, Partition};
pub use newick::{parse_newick, to_newick};
pub use nj::{neighbor_joining, Edge, UnrootedTree};
pub use topology::{robinson_foulds, Split, TopologySignature};

#[derive(Debug, Error)]
pub enum PhyloError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("alignment contains no sequences")]
    EmptyAlignment,
    #[error("sequence line before any FASTA header at line {0}")]
    MissingHeader(usize),
    #[error("row {taxon:?} has length {got}, expected {expected}")]
    RaggedRows {
        taxon: String,
        expected: usize,
        got: usize,
    },
    #[error("row {taxon:?} column {column}: unknown character {character:?}")]
    UnknownCharacter {
        taxon: String,
        character: char,
        column: usize,
    },
    #[error("duplicate taxon {0:?}")]
    DuplicateTaxon(String),
    #[error("partition line {line}: cannot parse {text:?}")]
    PartitionSyntax { line: usize, text: String },
    #[error("partitions {first:?} and {second:?} overlap")]
    PartitionOverlap { first: String, second: String },
    #[error("columns {start}-{end} are not covered by any partition")]
    PartitionGap { start: usize, end: usize },
    #[error("partition {gene:?} ends at {end}, beyond alignment width {width}")]
    PartitionOutOfBounds {
        gene: String,
        end: usize,
        width: usize,
    },
    #[error("partition {0:?} is empty")]
    EmptyPartition(String),
    #[error("duplicate gene name {0:?}")]
    DuplicateGene(String),
    #[error("unknown outgroup {0:?}")]
    UnknownOutgroup(String),
    #[error("need at least 3 taxa, got {0}")]
    TooFewTaxa(usize),
    #[error("word selects no genes")]
    EmptySubset,
    #[error("word has {got} bits for {expected} genes")]
    WordLength { expected: usize, got: usize },
    #[error("newick: {0}")]
    Newick(String),
}
