//! Interprocedural program dependence graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;

use super::callgraph::{build_call_graph, CallGraph};
use super::cfg::build_cfg;
use super::control::control_dependence;
use super::dataflow::{data_dependence_with_order, WorklistOrder};
use super::{DepKind, Edge, EdgeKind};
use crate::frontend::{LoweredFunction, LoweredProgram, NodeId, StatementIR, StmtKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IpdgOptions {
    /// Add a control edge from the function entry to every statement that has
    /// no other control parent.
    pub entry_control: bool,
    pub order: WorklistOrder,
}

impl Default for IpdgOptions {
    fn default() -> Self {
        IpdgOptions {
            entry_control: true,
            order: WorklistOrder::Forward,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ipdg {
    nodes: BTreeMap<NodeId, StatementIR>,
    edges: BTreeSet<Edge>,
    pub call_graph: CallGraph,
}

impl Ipdg {
    pub fn new(nodes: impl IntoIterator<Item = StatementIR>) -> Self {
        Ipdg {
            nodes: nodes.into_iter().map(|s| (s.id, s)).collect(),
            ..Ipdg::default()
        }
    }

    /// Inserts an edge; self-edges and edges with unknown endpoints are ignored.
    pub fn add_edge(&mut self, edge: Edge) -> bool {
        if edge.src == edge.dst
            || !self.nodes.contains_key(&edge.src)
            || !self.nodes.contains_key(&edge.dst)
        {
            return false;
        }
        self.edges.insert(edge)
    }

    pub fn node(&self, id: NodeId) -> Option<&StatementIR> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &StatementIR> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn edges_of(&self, kind: DepKind) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.kind.dep() == kind)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Outgoing and incoming edge lists per node.
    pub fn adjacency(&self) -> Adjacency<'_> {
        let mut adj = Adjacency::default();
        for e in &self.edges {
            adj.out.entry(e.src).or_default().push(e);
            adj.inc.entry(e.dst).or_default().push(e);
        }
        adj
    }
}

#[derive(Debug, Default)]
pub struct Adjacency<'a> {
    pub out: HashMap<NodeId, Vec<&'a Edge>>,
    pub inc: HashMap<NodeId, Vec<&'a Edge>>,
}

impl<'a> Adjacency<'a> {
    pub fn outgoing(&self, id: NodeId) -> &[&'a Edge] {
        self.out.get(&id).map_or(&[], Vec::as_slice)
    }

    pub fn incoming(&self, id: NodeId) -> &[&'a Edge] {
        self.inc.get(&id).map_or(&[], Vec::as_slice)
    }
}

pub fn build_ipdg(program: &LoweredProgram) -> Ipdg {
    build_ipdg_with(program, IpdgOptions::default())
}

pub fn build_ipdg_with(program: &LoweredProgram, opts: IpdgOptions) -> Ipdg {
    let local: Vec<Vec<Edge>> = program
        .functions
        .par_iter()
        .map(|f| function_edges(f, opts))
        .collect();

    let mut ipdg = Ipdg::new(program.statements().cloned());
    for e in local.into_iter().flatten() {
        ipdg.add_edge(e);
    }

    let call_graph = build_call_graph(program);
    let functions: HashMap<&str, &LoweredFunction> = program
        .functions
        .iter()
        .map(|f| (f.name.as_str(), f))
        .collect();
    for call in &call_graph.resolved {
        let callee = functions[call.callee.as_str()];
        ipdg.add_edge(Edge::new(call.site, callee.entry, EdgeKind::Call));
        for s in out_flowing(callee) {
            ipdg.add_edge(Edge::new(s, call.site, EdgeKind::Return));
        }
    }
    ipdg.call_graph = call_graph;
    ipdg
}

fn function_edges(f: &LoweredFunction, opts: IpdgOptions) -> Vec<Edge> {
    let cfg = build_cfg(f);
    let cd = control_dependence(&cfg);
    let dd = data_dependence_with_order(&cfg, &f.statements, opts.order);
    let mut edges: Vec<Edge> = cd
        .iter()
        .map(|&(a, b)| Edge::new(a, b, EdgeKind::Control))
        .collect();
    if opts.entry_control {
        let controlled: BTreeSet<NodeId> = cd.iter().map(|&(_, b)| b).collect();
        edges.extend(
            f.statements
                .iter()
                .filter(|s| s.id != f.entry && !controlled.contains(&s.id))
                .map(|s| Edge::new(f.entry, s.id, EdgeKind::Control)),
        );
    }
    edges.extend(
        dd.into_iter()
            .map(|(a, b, v)| Edge::new(a, b, EdgeKind::Data(v))),
    );
    edges
}

/// Callee statements whose effect flows back to the caller: returns that carry
/// a value, and writes through pointer parameters.
fn out_flowing(callee: &LoweredFunction) -> impl Iterator<Item = NodeId> + '_ {
    let pointer_params: BTreeSet<&str> = callee.pointer_params().collect();
    callee
        .statements
        .iter()
        .filter(move |s| {
            (s.kind == StmtKind::Return && s.text != "return;")
                || s.deref_writes
                    .iter()
                    .any(|v| pointer_params.contains(v.as_str()))
        })
        .map(|s| s.id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::cfg::tests::lower_src;

    fn line_edges(p: &LoweredProgram, g: &Ipdg, kind: DepKind) -> BTreeSet<(u32, u32)> {
        g.edges_of(kind)
            .map(|e| {
                (
                    p.statement(e.src).unwrap().line,
                    p.statement(e.dst).unwrap().line,
                )
            })
            .collect()
    }

    #[test]
    fn memory_leak_example_edges() {
        let p = lower_src(crate::frontend::tests::FIG3);
        let g = build_ipdg(&p);
        assert_eq!(line_edges(&p, &g, DepKind::Call), BTreeSet::from([(5, 8)]));
        assert_eq!(
            line_edges(&p, &g, DepKind::Return),
            BTreeSet::from([(11, 5)])
        );
        let data = line_edges(&p, &g, DepKind::Data);
        for e in [(3, 5), (4, 5), (3, 6), (4, 6), (8, 10), (8, 11), (10, 11)] {
            assert!(data.contains(&e), "missing data edge {e:?}");
        }
        assert!(!data.contains(&(5, 6)));
        let control = line_edges(&p, &g, DepKind::Control);
        assert_eq!(
            control,
            BTreeSet::from([(1, 3), (1, 4), (1, 5), (1, 6), (8, 10), (8, 11)])
        );
    }

    #[test]
    fn invariants_hold() {
        let p = lower_src(crate::frontend::tests::FIG3);
        let g = build_ipdg(&p);
        assert_eq!(g.len(), p.statements().count());
        for e in g.edges() {
            assert_ne!(e.src, e.dst);
            let (s, d) = (g.node(e.src).unwrap(), g.node(e.dst).unwrap());
            if let EdgeKind::Data(v) = &e.kind {
                assert!(s.defs.contains(v) && d.uses.contains(v));
            }
            if matches!(e.kind, EdgeKind::Call | EdgeKind::Return) {
                assert_ne!(s.function, d.function);
            }
        }
    }

    #[test]
    fn disjoint_functions() {
        let p = lower_src("void f(int a) { a = 1; } void g(int b) { b = 2; }");
        let g = build_ipdg(&p);
        for e in g.edges() {
            assert_eq!(
                g.node(e.src).unwrap().function,
                g.node(e.dst).unwrap().function
            );
        }
    }

    #[test]
    fn recursion_is_permitted() {
        let p = lower_src("int f(int n) { if (n) { return f(n - 1); } return 0; }");
        let g = build_ipdg(&p);
        assert_eq!(g.edges_of(DepKind::Call).count(), 1);
        assert_eq!(g.edges_of(DepKind::Return).count(), 1);
    }
}
