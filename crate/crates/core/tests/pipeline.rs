//! End-to-end plumbing on small corpora: labels, batching, persistence,
//! detection.

use std::collections::BTreeSet;
use std::path::PathBuf;

use mvd::pipeline::{
    analyze_paths, batches, detect_sources, evaluate, evaluate_scores, gen_corpus, read_jsonl,
    read_manifest, score_files, train, write_jsonl, AnalyzeOptions, GraphRecord, TrainConfig,
    TrainedModel,
};

fn quick() -> TrainConfig {
    TrainConfig {
        node_dim: 16,
        bases: 2,
        epochs: 3,
        doc2vec_epochs: 3,
        infer_steps: 10,
        ..TrainConfig::default()
    }
}

#[test]
fn seventy_graphs_make_three_batches() {
    let order: Vec<usize> = (0..70).rev().collect();
    let sizes: Vec<usize> = batches(&order, 32).map(<[usize]>::len).collect();
    assert_eq!(sizes, [32, 32, 6]);
    assert_eq!(
        batches(&order, 32).flatten().copied().collect::<Vec<_>>(),
        order
    );
}

#[test]
fn generated_corpus_labels_every_marked_line() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen_corpus(dir.path(), 3, 5).unwrap();
    assert_eq!(manifest, read_manifest(dir.path()).unwrap());
    let paths: Vec<PathBuf> = manifest.iter().map(|e| dir.path().join(&e.file)).collect();
    let analyzed = analyze_paths(&paths, &AnalyzeOptions::default());
    for (entry, result) in manifest.iter().zip(analyzed) {
        let file = result.unwrap_or_else(|e| panic!("{}: {e}", entry.file));
        assert!(
            file.warnings.is_empty(),
            "{}: {:?}",
            entry.file,
            file.warnings
        );
        assert!(!file.slices.is_empty(), "{} has no slices", entry.file);
        let vulnerable: BTreeSet<u32> = file
            .records()
            .iter()
            .flat_map(|r| {
                r.nodes
                    .iter()
                    .filter(|n| n.label == Some(1))
                    .map(|n| n.line)
            })
            .collect();
        let marked: BTreeSet<u32> = entry.marked_lines.iter().copied().collect();
        assert_eq!(vulnerable, marked, "{}", entry.file);
        assert_eq!(entry.vulnerable, !marked.is_empty());
    }
}

fn small_dataset() -> (tempfile::TempDir, Vec<mvd::pipeline::AnalyzedFile>) {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen_corpus(dir.path(), 2, 1).unwrap();
    let paths: Vec<PathBuf> = manifest.iter().map(|e| dir.path().join(&e.file)).collect();
    let files = analyze_paths(&paths, &AnalyzeOptions::default())
        .into_iter()
        .map(Result::unwrap)
        .collect();
    (dir, files)
}

#[test]
fn bundle_round_trip_and_repeatable_detection() {
    let (dir, files) = small_dataset();
    let records: Vec<GraphRecord> = files.iter().flat_map(|f| f.records()).collect();
    let data = dir.path().join("graphs.jsonl");
    write_jsonl(std::fs::File::create(&data).unwrap(), &records).unwrap();
    assert_eq!(read_jsonl(&data).unwrap(), records);

    let model = train(&records, &quick(), Default::default()).unwrap();
    assert_eq!(model.loss_history.len(), 3);
    assert!(model.loss_history.iter().all(|l| l.is_finite()));
    let path = dir.path().join("model.bin");
    model.save(&path).unwrap();
    let loaded = TrainedModel::load(&path).unwrap();
    assert_eq!(loaded.to_bytes().unwrap(), model.to_bytes().unwrap());

    let sources: Vec<(String, String)> = files
        .iter()
        .take(4)
        .map(|f| (f.file.clone(), std::fs::read_to_string(&f.file).unwrap()))
        .chain([("broken.c".to_string(), "int f( {".to_string())])
        .collect();
    let a = detect_sources(&loaded, &sources);
    let b = detect_sources(&model, &sources);
    assert_eq!(a, b);
    assert_eq!(a.errors.len(), 1);
    assert_eq!(a.errors[0].file, "broken.c");

    let scores = score_files(&model, &files).unwrap();
    assert!(scores
        .iter()
        .all(|s| (0.0..=1.0).contains(&s.probability) && s.function.is_some()));
    let report = evaluate_scores(&scores).unwrap();
    let labeled = scores.iter().filter(|s| s.label.is_some()).count();
    let m = report.statements;
    assert_eq!(m.tp + m.fp + m.tn + m.fn_, labeled);
    assert!(report.function_recall.is_some());
}

#[test]
fn corrupt_bundles_are_rejected() {
    assert!(TrainedModel::from_bytes(b"not a model").is_err());
    assert!(TrainedModel::from_bytes(&[]).is_err());
}

#[test]
fn metrics_reject_length_mismatch() {
    assert!(evaluate(&[true], &[true, false]).is_err());
}
