use std::fs;
use std::process::Command;
use std::sync::Arc;

use super::bootstrap::{bootstrap_support, lowest_support};
use super::distance::GapMode;
use super::matrix::{concat_subset, GeneMatrix};
use super::newick::parse_newick;
use super::nj::UnrootedTree;
use super::PhyloError;
use crate::bits::{BinaryPosition, FitnessReport, PMode};
use crate::fitness::{check_dimension, EvalError, FitnessEvaluator};

#[derive(Debug, Clone, PartialEq)]
pub struct PhyloSettings {
    pub replicates: usize,
    pub seed: u64,
    pub p_mode: PMode,
    pub gap_mode: GapMode,
}

impl Default for PhyloSettings {
    fn default() -> Self {
        Self {
            replicates: 100,
            seed: 1,
            p_mode: PMode::Percent,
            gap_mode: GapMode::Pairwise,
        }
    }
}

/// A user command that infers a tree with supports. `{input}` in the
/// command is replaced by the path of a FASTA file holding the concatenated
/// subset; the command must print a Newick tree on stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalCommand {
    pub command: String,
}

impl ExternalCommand {
    pub fn infer(&self, fasta: &str, taxa: &[String]) -> Result<UnrootedTree, EvalError> {
        let dir = tempfile::tempdir()?;
        let input = dir.path().join("subset.fasta");
        fs::write(&input, fasta)?;
        let cmd = self.command.replace("{input}", &input.to_string_lossy());
        let out = Command::new("sh").arg("-c").arg(&cmd).output()?;
        if !out.status.success() {
            return Err(EvalError::External(format!(
                "`{cmd}` exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        Ok(parse_newick(text.trim(), taxa)?)
    }
}

/// Reference tree with supports for the genes selected by `w`.
pub fn infer_tree(
    m: &GeneMatrix,
    w: &BinaryPosition,
    settings: &PhyloSettings,
) -> Result<UnrootedTree, PhyloError> {
    let block = concat_subset(m, w)?;
    bootstrap_support(&block, settings.replicates, settings.seed, settings.gap_mode)
}

fn report_for(tree: &UnrootedTree, w: &BinaryPosition, mode: PMode) -> Result<FitnessReport, EvalError> {
    let b = lowest_support(tree);
    let p = mode.p_value(w)?;
    Ok(FitnessReport::new(b, p, Some(tree.signature().id()))?)
}

/// Concatenate, bootstrap, score. The all-zero word scores 0 with no tree.
pub fn evaluate_phylo(
    m: &GeneMatrix,
    w: &BinaryPosition,
    settings: &PhyloSettings,
) -> Result<FitnessReport, EvalError> {
    check_dimension(m.n_genes(), w)?;
    if w.ones_count() == 0 {
        return Ok(FitnessReport::zero());
    }
    let tree = infer_tree(m, w, settings)?;
    report_for(&tree, w, settings.p_mode)
}

#[derive(Debug, Clone)]
pub struct PhyloEvaluator {
    matrix: Arc<GeneMatrix>,
    settings: PhyloSettings,
    external: Option<ExternalCommand>,
}

impl PhyloEvaluator {
    pub fn new(matrix: Arc<GeneMatrix>, settings: PhyloSettings) -> Self {
        Self {
            matrix,
            settings,
            external: None,
        }
    }

    pub fn with_external(mut self, command: ExternalCommand) -> Self {
        self.external = Some(command);
        self
    }

    pub fn matrix(&self) -> &GeneMatrix {
        &self.matrix
    }

    pub fn settings(&self) -> &PhyloSettings {
        &self.settings
    }

    /// The tree behind a word's report, or `None` for the all-zero word.
    pub fn tree(&self, w: &BinaryPosition) -> Result<Option<UnrootedTree>, EvalError> {
        check_dimension(self.matrix.n_genes(), w)?;
        if w.ones_count() == 0 {
            return Ok(None);
        }
        let tree = match &self.external {
            None => infer_tree(&self.matrix, w, &self.settings)?,
            Some(cmd) => {
                let block = concat_subset(&self.matrix, w)?;
                cmd.infer(&block.to_fasta(), self.matrix.taxa())?
            }
        };
        Ok(Some(tree))
    }
}

impl FitnessEvaluator for PhyloEvaluator {
    fn evaluate(&self, w: &BinaryPosition) -> Result<FitnessReport, EvalError> {
        match self.tree(w)? {
            None => Ok(FitnessReport::zero()),
            Some(tree) => report_for(&tree, w, self.settings.p_mode),
        }
    }

    fn instance_size(&self) -> usize {
        self.matrix.n_genes()
    }
}
