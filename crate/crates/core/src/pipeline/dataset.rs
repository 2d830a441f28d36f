//! Slice graphs as JSON lines, and source analysis that produces them.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::depgraph::{build_ipdg, Edge};
use crate::embedder::text_tokens;
use crate::frontend::{load_source, LabelMode, LabelWarning, LoweredProgram, NodeId, StatementIR};
use crate::fsgnn::GraphInput;
use crate::slicer::{slice_all_with, PoiConfig, SliceGraph, SliceOptions};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: NodeId,
    pub line: u32,
    pub file: String,
    pub text: String,
    /// 1 vulnerable, 0 not, absent when unlabeled.
    pub label: Option<u8>,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphRecord {
    pub origin: NodeId,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<Edge>,
}

impl GraphRecord {
    pub fn from_slice(file: &str, slice: &SliceGraph) -> Self {
        GraphRecord {
            origin: slice.origin,
            nodes: slice.nodes.values().map(|s| node_record(file, s)).collect(),
            edges: slice.edges.iter().cloned().collect(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("graph has no nodes".into());
        }
        let ids = self.index();
        if ids.len() != self.nodes.len() {
            return Err("duplicate node id".into());
        }
        if let Some(n) = self.nodes.iter().find(|n| n.label.is_some_and(|l| l > 1)) {
            return Err(format!("node {} has label outside {{0, 1}}", n.id));
        }
        if let Some(e) = self
            .edges
            .iter()
            .find(|e| !ids.contains_key(&e.src) || !ids.contains_key(&e.dst))
        {
            return Err(format!(
                "edge {} -> {} references an unknown node",
                e.src, e.dst
            ));
        }
        if !ids.contains_key(&self.origin) {
            return Err(format!("origin {} is not a node", self.origin));
        }
        Ok(())
    }

    /// Position of each node id in `nodes`.
    pub fn index(&self) -> BTreeMap<NodeId, usize> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id, i))
            .collect()
    }

    pub fn graph_input(&self) -> GraphInput {
        let index = self.index();
        GraphInput::new(
            self.nodes.len(),
            self.edges
                .iter()
                .filter_map(|e| Some((*index.get(&e.src)?, *index.get(&e.dst)?, e.kind.dep()))),
        )
    }

    pub fn targets(&self) -> Vec<Option<usize>> {
        self.nodes
            .iter()
            .map(|n| n.label.map(usize::from))
            .collect()
    }

    pub fn file(&self) -> &str {
        &self.nodes[0].file
    }
}

fn node_record(file: &str, s: &StatementIR) -> NodeRecord {
    NodeRecord {
        id: s.id,
        line: s.line,
        file: file.to_string(),
        text: s.text.clone(),
        label: s.label.as_class().map(|c| c as u8),
        tokens: text_tokens(&s.text, false),
    }
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[GraphRecord]) -> Result<(), PipelineError> {
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| PipelineError::Data(e.to_string()))?;
        w.write_all(b"\n").map_err(PipelineError::Write)?;
    }
    Ok(())
}

/// Reads and validates one graph per non-blank line.
pub fn read_jsonl(path: &Path) -> Result<Vec<GraphRecord>, PipelineError> {
    let file = std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| PipelineError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |msg: String| PipelineError::Data(format!("{}:{}: {msg}", path.display(), i + 1));
        let r: GraphRecord = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        r.validate().map_err(at)?;
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnalyzeOptions {
    pub poi: PoiConfig,
    pub slice: SliceOptions,
    pub label_mode: LabelMode,
}

/// One source file taken through parsing, dependence analysis and slicing.
#[derive(Debug, Clone)]
pub struct AnalyzedFile {
    pub file: String,
    pub program: LoweredProgram,
    pub slices: Vec<SliceGraph>,
    pub warnings: Vec<LabelWarning>,
}

impl AnalyzedFile {
    pub fn records(&self) -> Vec<GraphRecord> {
        self.slices
            .iter()
            .map(|s| GraphRecord::from_slice(&self.file, s))
            .collect()
    }
}

pub fn analyze_source(
    file: &str,
    source: &str,
    opts: &AnalyzeOptions,
) -> Result<AnalyzedFile, PipelineError> {
    let (program, warnings) =
        load_source(source, opts.label_mode).map_err(|e| PipelineError::Frontend {
            file: file.to_string(),
            source: e,
        })?;
    let ipdg = build_ipdg(&program);
    let slices = slice_all_with(&ipdg, &opts.poi, opts.slice);
    Ok(AnalyzedFile {
        file: file.to_string(),
        program,
        slices,
        warnings,
    })
}

/// Analyzes files in parallel; results keep the input order.
pub fn analyze_paths(
    paths: &[PathBuf],
    opts: &AnalyzeOptions,
) -> Vec<Result<AnalyzedFile, PipelineError>> {
    paths
        .par_iter()
        .map(|p| {
            let source = std::fs::read_to_string(p).map_err(|e| PipelineError::io(p, e))?;
            analyze_source(&p.display().to_string(), &source, opts)
        })
        .collect()
}
