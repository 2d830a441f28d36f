//! Scoring statements with a trained model, detection reports, evaluation.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{analyze_source, AnalyzeOptions, AnalyzedFile, GraphRecord};
use super::metrics::{evaluate, Metrics};
use super::train::prepare;
use super::{PipelineError, TrainedModel};
use crate::frontend::{LabelMode, NodeId};
use crate::slicer::SliceOptions;

/// A statement is reported when its vulnerable-class probability exceeds this.
pub const THRESHOLD: f64 = 0.5;

/// Highest vulnerable-class probability a statement received over all
/// slices containing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementScore {
    pub file: String,
    pub id: NodeId,
    pub line: u32,
    pub function: Option<String>,
    pub text: String,
    pub label: Option<u8>,
    pub probability: f64,
    /// Point of interest of the slice that gave the highest probability.
    pub origin: NodeId,
    pub origin_line: u32,
}

impl StatementScore {
    pub fn flagged(&self) -> bool {
        self.probability > THRESHOLD
    }
}

impl TrainedModel {
    pub fn analyze_options(&self, label_mode: LabelMode) -> AnalyzeOptions {
        AnalyzeOptions {
            poi: self.poi.clone(),
            slice: SliceOptions::default(),
            label_mode,
        }
    }
}

/// Scores every statement of the given graphs; ordered by (file, id).
pub fn score_records(
    model: &TrainedModel,
    records: &[GraphRecord],
) -> Result<Vec<StatementScore>, PipelineError> {
    let graphs = prepare(&model.doc2vec, records);
    let probs: Vec<Vec<f64>> = graphs
        .par_iter()
        .map(|g| {
            let t = model.gnn.forward(&g.input, g.x.view(), None, None)?;
            Ok(t.probs.column(1).to_vec())
        })
        .collect::<Result<_, PipelineError>>()?;
    let mut best: BTreeMap<(String, NodeId), StatementScore> = BTreeMap::new();
    for (r, p) in records.iter().zip(probs) {
        let origin_line = r
            .nodes
            .iter()
            .find(|n| n.id == r.origin)
            .map_or(0, |n| n.line);
        for (n, prob) in r.nodes.iter().zip(p) {
            let key = (n.file.clone(), n.id);
            if best.get(&key).is_some_and(|s| s.probability >= prob) {
                continue;
            }
            best.insert(
                key,
                StatementScore {
                    file: n.file.clone(),
                    id: n.id,
                    line: n.line,
                    function: None,
                    text: n.text.clone(),
                    label: n.label,
                    probability: prob,
                    origin: r.origin,
                    origin_line,
                },
            );
        }
    }
    Ok(best.into_values().collect())
}

/// Like [`score_records`], with enclosing function names filled in.
pub fn score_files(
    model: &TrainedModel,
    files: &[AnalyzedFile],
) -> Result<Vec<StatementScore>, PipelineError> {
    let records: Vec<GraphRecord> = files.iter().flat_map(|f| f.records()).collect();
    let mut scores = score_records(model, &records)?;
    let by_name: BTreeMap<&str, &AnalyzedFile> =
        files.iter().map(|f| (f.file.as_str(), f)).collect();
    for s in &mut scores {
        s.function = by_name
            .get(s.file.as_str())
            .and_then(|f| f.program.statement(s.id))
            .map(|st| st.function.clone());
    }
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub file: String,
    pub line: u32,
    pub text: String,
    pub probability: f64,
    pub origin_line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileError {
    pub file: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectReport {
    pub findings: Vec<Finding>,
    pub errors: Vec<FileError>,
}

/// Runs detection on `(name, source)` pairs. A file that fails is recorded
/// in `errors` and does not stop the others.
pub fn detect_sources(model: &TrainedModel, sources: &[(String, String)]) -> DetectReport {
    let opts = model.analyze_options(LabelMode::Detection);
    let per_file: Vec<Result<Vec<Finding>, FileError>> = sources
        .par_iter()
        .map(|(name, text)| {
            let fail = |e: PipelineError| FileError {
                file: name.clone(),
                message: e.to_string(),
            };
            let analyzed = analyze_source(name, text, &opts).map_err(fail)?;
            let scores = score_files(model, std::slice::from_ref(&analyzed)).map_err(fail)?;
            Ok(scores
                .into_iter()
                .filter(StatementScore::flagged)
                .map(|s| Finding {
                    file: s.file,
                    line: s.line,
                    text: s.text,
                    probability: s.probability,
                    origin_line: s.origin_line,
                })
                .collect())
        })
        .collect();
    let mut report = DetectReport::default();
    for r in per_file {
        match r {
            Ok(f) => report.findings.extend(f),
            Err(e) => report.errors.push(e),
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub statements: Metrics,
    /// Functions holding at least one vulnerable statement.
    pub functions_vulnerable: usize,
    /// Those among them with a vulnerable statement flagged.
    pub functions_detected: usize,
    /// `None` when no function names are known.
    pub function_recall: Option<f64>,
}

/// Statement metrics over labeled scores, plus function-level recall.
pub fn evaluate_scores(scores: &[StatementScore]) -> Result<EvalReport, PipelineError> {
    let labeled: Vec<&StatementScore> = scores.iter().filter(|s| s.label.is_some()).collect();
    let predicted: Vec<bool> = labeled.iter().map(|s| s.flagged()).collect();
    let actual: Vec<bool> = labeled.iter().map(|s| s.label == Some(1)).collect();
    let statements = evaluate(&predicted, &actual)?;
    let mut vulnerable = BTreeSet::new();
    let mut detected = BTreeSet::new();
    for s in labeled.iter().filter(|s| s.label == Some(1)) {
        if let Some(f) = &s.function {
            vulnerable.insert((&s.file, f));
            if s.flagged() {
                detected.insert((&s.file, f));
            }
        }
    }
    Ok(EvalReport {
        statements,
        functions_vulnerable: vulnerable.len(),
        functions_detected: detected.len(),
        function_recall: (!vulnerable.is_empty())
            .then(|| detected.len() as f64 / vulnerable.len() as f64),
    })
}
