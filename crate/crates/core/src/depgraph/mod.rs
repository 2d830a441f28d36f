//! Control-flow graphs, dependence analysis and the interprocedural PDG.

pub mod callgraph;
pub mod cfg;
pub mod control;
pub mod dataflow;
pub mod dot;
pub mod ipdg;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::frontend::NodeId;

pub use callgraph::{build_call_graph, CallGraph, CallSite};
pub use cfg::{build_cfg, Cfg, CfgNode};
pub use control::{control_dependence, control_dependence_with, post_dominators};
pub use dataflow::{data_dependence, data_dependence_with_order, WorklistOrder};
pub use ipdg::{build_ipdg, build_ipdg_with, Ipdg, IpdgOptions};

/// The four dependence relations, without payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepKind {
    Control,
    Data,
    Call,
    Return,
}

impl DepKind {
    pub const ALL: [DepKind; 4] = [
        DepKind::Control,
        DepKind::Data,
        DepKind::Call,
        DepKind::Return,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DepKind::Control => "Control",
            DepKind::Data => "Data",
            DepKind::Call => "Call",
            DepKind::Return => "Return",
        };
        f.write_str(s)
    }
}

/// Edge kind; data edges carry the variable that flows.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Control,
    Data(String),
    Call,
    Return,
}

impl EdgeKind {
    pub fn dep(&self) -> DepKind {
        match self {
            EdgeKind::Control => DepKind::Control,
            EdgeKind::Data(_) => DepKind::Data,
            EdgeKind::Call => DepKind::Call,
            EdgeKind::Return => DepKind::Return,
        }
    }

    pub fn var(&self) -> Option<&str> {
        match self {
            EdgeKind::Data(v) => Some(v),
            _ => None,
        }
    }

    pub fn from_parts(kind: DepKind, var: Option<String>) -> EdgeKind {
        match kind {
            DepKind::Control => EdgeKind::Control,
            DepKind::Data => EdgeKind::Data(var.unwrap_or_default()),
            DepKind::Call => EdgeKind::Call,
            DepKind::Return => EdgeKind::Return,
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeKind::Data(v) => write!(f, "Data({v})"),
            k => write!(f, "{}", k.dep()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "EdgeRecord", try_from = "EdgeRecord")]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn new(src: NodeId, dst: NodeId, kind: EdgeKind) -> Self {
        Edge { src, dst, kind }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    src: NodeId,
    dst: NodeId,
    kind: DepKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    var: Option<String>,
}

impl From<Edge> for EdgeRecord {
    fn from(e: Edge) -> Self {
        EdgeRecord {
            src: e.src,
            dst: e.dst,
            kind: e.kind.dep(),
            var: e.kind.var().map(str::to_string),
        }
    }
}

impl TryFrom<EdgeRecord> for Edge {
    type Error = String;

    fn try_from(r: EdgeRecord) -> Result<Self, String> {
        match (r.kind, &r.var) {
            (DepKind::Data, None) => Err("data edge without `var`".into()),
            (DepKind::Data, Some(_)) | (_, None) => Ok(Edge {
                src: r.src,
                dst: r.dst,
                kind: EdgeKind::from_parts(r.kind, r.var),
            }),
            (k, Some(_)) => Err(format!("`var` is only allowed on data edges, not {k}")),
        }
    }
}
