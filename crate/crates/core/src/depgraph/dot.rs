//! Graphviz export for debugging.

use std::fmt::Write;

use super::cfg::{Cfg, CfgNode};
use super::ipdg::Ipdg;
use crate::frontend::LoweredFunction;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn cfg_to_dot(cfg: &Cfg, func: &LoweredFunction) -> String {
    let mut out = format!("digraph \"cfg_{}\" {{\n", escape(&cfg.function));
    for (i, node) in cfg.nodes().iter().enumerate() {
        let label = match node {
            CfgNode::Entry => "ENTRY".to_string(),
            CfgNode::Exit => "EXIT".to_string(),
            CfgNode::Stmt(id) => func
                .statement(*id)
                .map(|s| format!("{}: {}", s.line, s.text))
                .unwrap_or_default(),
        };
        writeln!(out, "  c{i} [label=\"{}\"];", escape(&label)).unwrap();
    }
    for i in 0..cfg.len() {
        for j in cfg.successors(i) {
            writeln!(out, "  c{i} -> c{j};").unwrap();
        }
    }
    out.push_str("}\n");
    out
}

pub fn ipdg_to_dot(g: &Ipdg) -> String {
    let mut out = String::from("digraph ipdg {\n");
    for s in g.nodes() {
        writeln!(
            out,
            "  n{} [label=\"{}\"];",
            s.id.0,
            escape(&format!("{}: {}", s.line, s.text))
        )
        .unwrap();
    }
    for e in g.edges() {
        writeln!(
            out,
            "  n{} -> n{} [label=\"{}\"];",
            e.src.0,
            e.dst.0,
            escape(&e.kind.to_string())
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}
