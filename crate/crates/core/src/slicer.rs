//! Program points of interest and slice extraction.
//!
//! A slice is the backward closure of a point of interest over every
//! dependence kind, joined with its forward closure over data, call and
//! return edges.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depgraph::{DepKind, Edge, Ipdg};
use crate::frontend::{NodeId, StatementIR};

pub const DEFAULT_APIS: &[&str] = &[
    "malloc",
    "calloc",
    "realloc",
    "free",
    "memcpy",
    "memmove",
    "memset",
    "strcpy",
    "strncpy",
    "strcat",
    "strlen",
    "kfree",
    "kcalloc",
    "mempool_free",
];

#[derive(Debug, thiserror::Error)]
pub enum SlicerError {
    #[error("cannot read API list {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("API list is empty")]
    EmptyApiList,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoiConfig {
    pub api_names: BTreeSet<String>,
    pub enable_pointer_poi: bool,
}

impl Default for PoiConfig {
    fn default() -> Self {
        PoiConfig {
            api_names: DEFAULT_APIS.iter().map(|s| s.to_string()).collect(),
            enable_pointer_poi: true,
        }
    }
}

impl PoiConfig {
    /// Parses one API name per line; `#` starts a comment.
    pub fn parse_list(text: &str) -> Result<Self, SlicerError> {
        let api_names: BTreeSet<String> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        if api_names.is_empty() {
            return Err(SlicerError::EmptyApiList);
        }
        Ok(PoiConfig {
            api_names,
            enable_pointer_poi: true,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, SlicerError> {
        let text = std::fs::read_to_string(path).map_err(|source| SlicerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_list(&text)
    }

    pub fn is_poi(&self, s: &StatementIR) -> bool {
        s.calls.iter().any(|c| self.api_names.contains(c))
            || (self.enable_pointer_poi && s.is_pointer_op)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceOptions {
    /// Let the forward closure cross call and return edges.
    pub interproc_forward: bool,
}

impl Default for SliceOptions {
    fn default() -> Self {
        SliceOptions {
            interproc_forward: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceGraph {
    pub origin: NodeId,
    pub nodes: BTreeMap<NodeId, StatementIR>,
    pub edges: BTreeSet<Edge>,
}

impl SliceGraph {
    pub fn node_ids(&self) -> BTreeSet<NodeId> {
        self.nodes.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Points of interest ordered by (function, line, id).
pub fn find_pois(ipdg: &Ipdg, config: &PoiConfig) -> Vec<NodeId> {
    let mut pois: Vec<&StatementIR> = ipdg.nodes().filter(|s| config.is_poi(s)).collect();
    pois.sort_by(|a, b| (&a.function, a.line, a.id).cmp(&(&b.function, b.line, b.id)));
    pois.into_iter().map(|s| s.id).collect()
}

pub fn slice(ipdg: &Ipdg, poi: NodeId) -> SliceGraph {
    slice_with(ipdg, poi, SliceOptions::default())
}

pub fn slice_with(ipdg: &Ipdg, poi: NodeId, opts: SliceOptions) -> SliceGraph {
    let adj = ipdg.adjacency();
    let backward = closure(poi, |n| {
        adj.incoming(n).iter().map(|e| e.src).collect::<Vec<_>>()
    });
    let forward = closure(poi, |n| {
        adj.outgoing(n)
            .iter()
            .filter(|e| forward_kind(e.kind.dep(), opts))
            .map(|e| e.dst)
            .collect::<Vec<_>>()
    });
    let keep: HashSet<NodeId> = backward.union(&forward).copied().collect();
    SliceGraph {
        origin: poi,
        nodes: keep
            .iter()
            .filter_map(|id| ipdg.node(*id).map(|s| (*id, s.clone())))
            .collect(),
        edges: ipdg
            .edges()
            .iter()
            .filter(|e| keep.contains(&e.src) && keep.contains(&e.dst))
            .cloned()
            .collect(),
    }
}

fn forward_kind(kind: DepKind, opts: SliceOptions) -> bool {
    match kind {
        DepKind::Data => true,
        DepKind::Call | DepKind::Return => opts.interproc_forward,
        DepKind::Control => false,
    }
}

fn closure(start: NodeId, next: impl Fn(NodeId) -> Vec<NodeId>) -> HashSet<NodeId> {
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        for m in next(n) {
            if seen.insert(m) {
                queue.push_back(m);
            }
        }
    }
    seen
}

pub fn slice_all(ipdg: &Ipdg, config: &PoiConfig) -> Vec<SliceGraph> {
    slice_all_with(ipdg, config, SliceOptions::default())
}

/// Slices every point of interest, dropping slices whose node set repeats.
pub fn slice_all_with(ipdg: &Ipdg, config: &PoiConfig, opts: SliceOptions) -> Vec<SliceGraph> {
    let slices: Vec<SliceGraph> = find_pois(ipdg, config)
        .into_par_iter()
        .map(|poi| slice_with(ipdg, poi, opts))
        .collect();
    let mut seen = HashSet::new();
    slices
        .into_iter()
        .filter(|s| seen.insert(s.node_ids()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::build_ipdg;
    use crate::frontend::{lower, parse, tokenize, LoweredProgram};

    fn lower_src(src: &str) -> LoweredProgram {
        lower(&parse(&tokenize(src).unwrap()).unwrap())
    }

    fn lines(p: &LoweredProgram, ids: impl IntoIterator<Item = NodeId>) -> BTreeSet<u32> {
        ids.into_iter()
            .map(|id| p.statement(id).unwrap().line)
            .collect()
    }

    #[test]
    fn memory_leak_example_slice() {
        let p = lower_src(crate::frontend::tests::FIG3);
        let g = build_ipdg(&p);
        let poi = p.statements().find(|s| s.line == 5).unwrap().id;
        assert!(find_pois(&g, &PoiConfig::default()).contains(&poi));
        let s = slice(&g, poi);
        assert_eq!(
            lines(&p, s.node_ids()),
            BTreeSet::from([1, 3, 4, 5, 8, 10, 11])
        );
        let all = slice_all(&g, &PoiConfig::default());
        assert!(all.iter().any(|sl| sl.node_ids() == s.node_ids()));
    }

    #[test]
    fn without_interprocedural_forward() {
        let p = lower_src(
            "int g(int a)\n{\nreturn a;\n}\nvoid f()\n{\nint x = 1;\nint y = g(x);\nint z = y;\n}",
        );
        let g = build_ipdg(&p);
        let poi = p.statements().find(|s| s.line == 7).unwrap().id;
        let on = slice_with(&g, poi, SliceOptions::default());
        let off = slice_with(
            &g,
            poi,
            SliceOptions {
                interproc_forward: false,
            },
        );
        assert_eq!(lines(&p, on.node_ids()), BTreeSet::from([1, 3, 5, 7, 8, 9]));
        assert_eq!(lines(&p, off.node_ids()), BTreeSet::from([5, 7, 8, 9]));
    }

    #[test]
    fn no_pois() {
        let p = lower_src("int f(int a) { a = a + 1; return a; }");
        let g = build_ipdg(&p);
        assert!(find_pois(&g, &PoiConfig::default()).is_empty());
        assert!(slice_all(&g, &PoiConfig::default()).is_empty());
    }

    #[test]
    fn api_and_pointer_pois_are_deduplicated() {
        let p = lower_src("void f()\n{\nchar *p;\np = malloc(8);\n}");
        let g = build_ipdg(&p);
        let pois = find_pois(&g, &PoiConfig::default());
        assert_eq!(lines(&p, pois.iter().copied()), BTreeSet::from([3, 4]));
        assert_eq!(pois.len(), 2);
    }

    #[test]
    fn api_list_file_format() {
        let cfg = PoiConfig::parse_list("# header\nmalloc\n  free # trailing\n\n").unwrap();
        assert_eq!(
            cfg.api_names,
            BTreeSet::from(["free".into(), "malloc".into()])
        );
        assert!(matches!(
            PoiConfig::parse_list("# only\n"),
            Err(SlicerError::EmptyApiList)
        ));
    }
}
