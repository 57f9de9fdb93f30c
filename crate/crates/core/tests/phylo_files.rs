use std::fs;
use std::sync::Arc;

use phyloswarm::fitness::FitnessEvaluator;
use phyloswarm::phylo::synth::{blurring_fixture, concordant_fixture, BlurringParams};
use phyloswarm::phylo::{
    infer_tree, load_gene_matrix, parse_newick, robinson_foulds, to_newick, PhyloError,
    PhyloEvaluator, PhyloSettings,
};
use phyloswarm::BinaryPosition;

#[test]
fn matrix_files_round_trip_through_disk() {
    let fx = blurring_fixture(&BlurringParams::default(), 4);
    let dir = tempfile::tempdir().unwrap();
    let fasta = dir.path().join("genes.fasta");
    let parts = dir.path().join("genes.parts");
    fs::write(&fasta, fx.matrix.to_fasta()).unwrap();
    fs::write(&parts, fx.matrix.partition_text()).unwrap();
    let m = load_gene_matrix(&fasta, &parts, Some(fx.matrix.outgroup_name())).unwrap();
    assert_eq!(m, fx.matrix);
    assert_eq!(m.n_genes(), 10);
}

#[test]
fn load_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let fasta = dir.path().join("a.fasta");
    let parts = dir.path().join("a.parts");
    fs::write(&fasta, ">a\nACGTAC\n>b\nACGTA\n>c\nACGTAC\n").unwrap();
    fs::write(&parts, "g1 = 1-3\ng2 = 4-6\n").unwrap();
    assert!(matches!(
        load_gene_matrix(&fasta, &parts, None),
        Err(PhyloError::RaggedRows { .. })
    ));

    fs::write(&fasta, ">a\nACGTAC\n>b\nACGTAA\n>c\nACGTAC\n").unwrap();
    fs::write(&parts, "g1 = 1-2\ng2 = 4-6\n").unwrap();
    assert!(matches!(
        load_gene_matrix(&fasta, &parts, None),
        Err(PhyloError::PartitionGap { start: 3, end: 3 })
    ));

    fs::write(&parts, "g1 = 1-3\ng2 = 4-6\n").unwrap();
    assert!(matches!(
        load_gene_matrix(&fasta, &parts, Some("zz")),
        Err(PhyloError::UnknownOutgroup(_))
    ));
    assert!(load_gene_matrix(&fasta, &parts, Some("b")).is_ok());

    let missing = dir.path().join("missing.fasta");
    match load_gene_matrix(&missing, &parts, None) {
        Err(PhyloError::Io { path, .. }) => assert_eq!(path, missing),
        other => panic!("expected an io error, got {other:?}"),
    }
}

#[test]
fn newick_output_parses_back_to_the_same_topology() {
    let m = concordant_fixture(6, 3);
    let settings = PhyloSettings {
        replicates: 20,
        ..PhyloSettings::default()
    };
    let tree = infer_tree(&m, &BinaryPosition::ones(6), &settings).unwrap();
    let text = to_newick(&tree, m.outgroup());
    assert!(text.ends_with(';'));
    let back = parse_newick(&text, m.taxa()).unwrap();
    assert_eq!(robinson_foulds(&tree, &back), 0);
    assert_eq!(back.signature().id(), tree.signature().id());
    assert_eq!(back.supports(), tree.supports());
}

#[test]
fn single_replicate_supports_are_all_or_nothing() {
    let fx = blurring_fixture(&BlurringParams::default(), 1);
    let settings = PhyloSettings {
        replicates: 1,
        seed: 5,
        ..PhyloSettings::default()
    };
    let tree = infer_tree(&fx.matrix, &BinaryPosition::ones(10), &settings).unwrap();
    let supports = tree.supports();
    assert!(!supports.is_empty());
    assert!(supports.iter().all(|&s| s == 0.0 || s == 100.0), "{supports:?}");
}

#[test]
fn excluding_the_discordant_gene_restores_full_support() {
    let fx = blurring_fixture(&BlurringParams::default(), 6);
    let ev = PhyloEvaluator::new(Arc::new(fx.matrix.clone()), PhyloSettings::default());
    let all = ev.evaluate(&BinaryPosition::ones(10)).unwrap();
    let target = ev.evaluate(&fx.target).unwrap();
    assert_eq!(target.b, 100.0);
    assert_eq!(target.p, 90.0);
    assert_eq!(target.fitness, 95.0);
    assert!(all.fitness < target.fitness);
    assert_eq!(ev.evaluate(&BinaryPosition::zeros(10)).unwrap().fitness, 0.0);
    assert!(ev.evaluate(&BinaryPosition::ones(9)).is_err());
}

#[test]
fn evaluation_is_reproducible() {
    let fx = blurring_fixture(&BlurringParams::default(), 2);
    let ev = PhyloEvaluator::new(Arc::new(fx.matrix), PhyloSettings::default());
    let w: BinaryPosition = "1011011101".parse().unwrap();
    assert_eq!(ev.evaluate(&w).unwrap(), ev.evaluate(&w).unwrap());
}
