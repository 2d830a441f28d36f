//! Per-function control-flow graph.

use std::collections::HashMap;

use crate::frontend::{Flow, LoweredFunction, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CfgNode {
    Entry,
    Exit,
    Stmt(NodeId),
}

/// Index 0 is the synthetic entry and index 1 the synthetic exit.
#[derive(Debug, Clone)]
pub struct Cfg {
    pub function: String,
    nodes: Vec<CfgNode>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    index: HashMap<NodeId, usize>,
}

pub const ENTRY: usize = 0;
pub const EXIT: usize = 1;

impl Cfg {
    pub fn new(function: impl Into<String>, stmts: impl IntoIterator<Item = NodeId>) -> Self {
        let mut cfg = Cfg {
            function: function.into(),
            nodes: vec![CfgNode::Entry, CfgNode::Exit],
            succ: vec![Vec::new(), Vec::new()],
            pred: vec![Vec::new(), Vec::new()],
            index: HashMap::new(),
        };
        for id in stmts {
            cfg.index.insert(id, cfg.nodes.len());
            cfg.nodes.push(CfgNode::Stmt(id));
            cfg.succ.push(Vec::new());
            cfg.pred.push(Vec::new());
        }
        cfg
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if !self.succ[a].contains(&b) {
            self.succ[a].push(b);
            self.pred[b].push(a);
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 2
    }

    pub fn entry(&self) -> usize {
        ENTRY
    }

    pub fn exit(&self) -> usize {
        EXIT
    }

    pub fn node(&self, i: usize) -> CfgNode {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[CfgNode] {
        &self.nodes
    }

    pub fn stmt(&self, i: usize) -> Option<NodeId> {
        match self.nodes[i] {
            CfgNode::Stmt(id) => Some(id),
            _ => None,
        }
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    pub fn predecessors(&self, i: usize) -> &[usize] {
        &self.pred[i]
    }

    pub fn edges(&self) -> Vec<(CfgNode, CfgNode)> {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(a, ss)| ss.iter().map(move |&b| (a, b)))
            .map(|(a, b)| (self.nodes[a], self.nodes[b]))
            .collect()
    }

    /// Successor pairs between statements only.
    pub fn stmt_edges(&self) -> Vec<(NodeId, NodeId)> {
        self.edges()
            .into_iter()
            .filter_map(|e| match e {
                (CfgNode::Stmt(a), CfgNode::Stmt(b)) => Some((a, b)),
                _ => None,
            })
            .collect()
    }

    fn reach(&self, start: usize, forward: bool) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(n) = stack.pop() {
            let next = if forward {
                &self.succ[n]
            } else {
                &self.pred[n]
            };
            for &m in next {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        seen
    }

    /// Every node reachable from entry and reaching exit.
    pub fn is_well_formed(&self) -> bool {
        self.reach(ENTRY, true).iter().all(|&b| b) && self.reach(EXIT, false).iter().all(|&b| b)
    }
}

/// Builds the CFG of one lowered function from its structured flow.
pub fn build_cfg(func: &LoweredFunction) -> Cfg {
    let mut cfg = Cfg::new(func.name.clone(), func.statements.iter().map(|s| s.id));
    let tails = seq(&mut cfg, &func.flow, vec![ENTRY]);
    for t in tails {
        cfg.add_edge(t, EXIT);
    }
    cfg
}

fn connect(cfg: &mut Cfg, preds: &[usize], n: usize) {
    if preds.is_empty() {
        // unreachable code (after a return) hangs off the entry
        cfg.add_edge(ENTRY, n);
    }
    for &p in preds {
        cfg.add_edge(p, n);
    }
}

fn seq(cfg: &mut Cfg, flows: &[Flow], mut preds: Vec<usize>) -> Vec<usize> {
    for f in flows {
        preds = step(cfg, f, preds);
    }
    preds
}

fn step(cfg: &mut Cfg, flow: &Flow, preds: Vec<usize>) -> Vec<usize> {
    let idx = |cfg: &Cfg, id: &NodeId| cfg.index_of(*id).expect("flow refers to own statement");
    match flow {
        Flow::Simple(id) => {
            let n = idx(cfg, id);
            connect(cfg, &preds, n);
            vec![n]
        }
        Flow::Return(id) => {
            let n = idx(cfg, id);
            connect(cfg, &preds, n);
            cfg.add_edge(n, EXIT);
            Vec::new()
        }
        Flow::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let c = idx(cfg, cond);
            connect(cfg, &preds, c);
            let mut tails = seq(cfg, then_branch, vec![c]);
            for t in seq(cfg, else_branch, vec![c]) {
                if !tails.contains(&t) {
                    tails.push(t);
                }
            }
            tails
        }
        Flow::Loop { cond, body, step } => {
            let c = idx(cfg, cond);
            connect(cfg, &preds, c);
            let mut tails = seq(cfg, body, vec![c]);
            if let Some(s) = step {
                let s = idx(cfg, s);
                connect(cfg, &tails, s);
                tails = vec![s];
            }
            for t in tails {
                cfg.add_edge(t, c);
            }
            vec![c]
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::frontend::{lower, parse, tokenize, LoweredProgram};

    pub(crate) fn lower_src(src: &str) -> LoweredProgram {
        lower(&parse(&tokenize(src).unwrap()).unwrap())
    }

    /// CFG edges as (line-or-marker) text pairs, for readable assertions.
    fn text_edges(src: &str) -> Vec<(String, String)> {
        let p = lower_src(src);
        let f = &p.functions[0];
        let cfg = build_cfg(f);
        assert!(cfg.is_well_formed());
        let name = |n: CfgNode| match n {
            CfgNode::Entry => "ENTRY".to_string(),
            CfgNode::Exit => "EXIT".to_string(),
            CfgNode::Stmt(id) => f.statement(id).unwrap().text.clone(),
        };
        let mut e: Vec<_> = cfg
            .edges()
            .into_iter()
            .map(|(a, b)| (name(a), name(b)))
            .collect();
        e.sort();
        e
    }

    fn pairs(items: &[(&str, &str)]) -> Vec<(String, String)> {
        let mut v: Vec<_> = items
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        v.sort();
        v
    }

    #[test]
    fn straight_line() {
        assert_eq!(
            text_edges("void f(int a) { a = 1; a = 2; }"),
            pairs(&[
                ("ENTRY", "void f(int a)"),
                ("void f(int a)", "a = 1;"),
                ("a = 1;", "a = 2;"),
                ("a = 2;", "EXIT"),
            ])
        );
    }

    #[test]
    fn diamond() {
        let e = text_edges("void f(int c, int a) { if (c) { a = 1; } else { a = 2; } a = 3; }");
        for (x, y) in [
            ("if (c)", "a = 1;"),
            ("if (c)", "a = 2;"),
            ("a = 1;", "a = 3;"),
            ("a = 2;", "a = 3;"),
        ] {
            assert!(e.contains(&(x.into(), y.into())), "{x} -> {y}");
        }
        assert!(!e.contains(&("if (c)".into(), "a = 3;".into())));
    }

    #[test]
    fn while_loop() {
        let e = text_edges("void f(int c, int b) { while (c) { b = 1; } c = 0; }");
        for (x, y) in [
            ("while (c)", "b = 1;"),
            ("b = 1;", "while (c)"),
            ("while (c)", "c = 0;"),
        ] {
            assert!(e.contains(&(x.into(), y.into())), "{x} -> {y}");
        }
    }

    #[test]
    fn for_loop_step_feeds_condition() {
        let e = text_edges("void f(int n) { int i; for (i = 0; i < n; i++) { n--; } }");
        let hdr = "for (i = 0; i < n; i++)";
        for (x, y) in [
            ("i = 0;", hdr),
            (hdr, "n--;"),
            ("n--;", "i++"),
            ("i++", hdr),
            (hdr, "EXIT"),
        ] {
            assert!(e.contains(&(x.into(), y.into())), "{x} -> {y}");
        }
    }

    #[test]
    fn return_goes_to_exit_and_dead_code_is_attached() {
        let e = text_edges("void f(int a) { if (a) { return; } a = 1; return; a = 2; }");
        assert!(e.contains(&("return;".into(), "EXIT".into())));
        assert!(e.contains(&("ENTRY".into(), "a = 2;".into())));
    }
}
