//! Reaching definitions and data dependence.

use std::collections::{BTreeSet, HashMap, VecDeque};

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::cfg::Cfg;
use crate::frontend::{NodeId, StatementIR};

/// Initial worklist ordering. The fixpoint does not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WorklistOrder {
    #[default]
    Forward,
    Reverse,
    Shuffled(u64),
}

pub fn data_dependence(
    cfg: &Cfg,
    statements: &[StatementIR],
) -> BTreeSet<(NodeId, NodeId, String)> {
    data_dependence_with_order(cfg, statements, WorklistOrder::Forward)
}

pub fn data_dependence_with_order(
    cfg: &Cfg,
    statements: &[StatementIR],
    order: WorklistOrder,
) -> BTreeSet<(NodeId, NodeId, String)> {
    let by_id: HashMap<NodeId, &StatementIR> = statements.iter().map(|s| (s.id, s)).collect();
    let stmt_at = |i: usize| cfg.stmt(i).and_then(|id| by_id.get(&id).copied());
    let n = cfg.len();

    // one definition per (node, must-defined variable)
    let mut defs: Vec<(usize, &str)> = Vec::new();
    for i in 0..n {
        if let Some(s) = stmt_at(i) {
            defs.extend(s.must_defs().map(|v| (i, v.as_str())));
        }
    }
    let m = defs.len();
    let mut by_var: HashMap<&str, FixedBitSet> = HashMap::new();
    for (d, &(_, v)) in defs.iter().enumerate() {
        by_var
            .entry(v)
            .or_insert_with(|| FixedBitSet::with_capacity(m))
            .insert(d);
    }
    let mut gen = vec![FixedBitSet::with_capacity(m); n];
    let mut kill = vec![FixedBitSet::with_capacity(m); n];
    for (d, &(i, v)) in defs.iter().enumerate() {
        gen[i].insert(d);
        kill[i].union_with(&by_var[v]);
    }

    let mut order_vec: Vec<usize> = (0..n).collect();
    match order {
        WorklistOrder::Forward => {}
        WorklistOrder::Reverse => order_vec.reverse(),
        WorklistOrder::Shuffled(seed) => order_vec.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
    }
    let mut queued = vec![true; n];
    let mut work: VecDeque<usize> = order_vec.into_iter().collect();
    let mut inn = vec![FixedBitSet::with_capacity(m); n];
    let mut out = vec![FixedBitSet::with_capacity(m); n];
    while let Some(v) = work.pop_front() {
        queued[v] = false;
        let mut in_v = FixedBitSet::with_capacity(m);
        for &p in cfg.predecessors(v) {
            in_v.union_with(&out[p]);
        }
        let mut out_v = in_v.clone();
        out_v.difference_with(&kill[v]);
        out_v.union_with(&gen[v]);
        inn[v] = in_v;
        if out_v != out[v] {
            out[v] = out_v;
            for &s in cfg.successors(v) {
                if !queued[s] {
                    queued[s] = true;
                    work.push_back(s);
                }
            }
        }
    }

    let mut edges = BTreeSet::new();
    for u in 0..n {
        let Some(su) = stmt_at(u) else { continue };
        for d in inn[u].ones() {
            let (i, v) = defs[d];
            if su.uses.contains(v) {
                edges.insert((cfg.stmt(i).unwrap(), su.id, v.to_string()));
            }
        }
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::cfg::build_cfg;
    use crate::depgraph::cfg::tests::lower_src;

    fn dd_lines(src: &str) -> BTreeSet<(u32, u32, String)> {
        let p = lower_src(src);
        let f = &p.functions[0];
        let cfg = build_cfg(f);
        data_dependence(&cfg, &f.statements)
            .into_iter()
            .map(|(a, b, v)| {
                (
                    f.statement(a).unwrap().line,
                    f.statement(b).unwrap().line,
                    v,
                )
            })
            .collect()
    }

    fn set(items: &[(u32, u32, &str)]) -> BTreeSet<(u32, u32, String)> {
        items
            .iter()
            .map(|&(a, b, v)| (a, b, v.to_string()))
            .collect()
    }

    #[test]
    fn kill_on_chain() {
        let src = "void f()\n{\nint x; int y; int z;\nx = 1;\ny = x;\nx = 2;\nz = x;\n}";
        let dd: BTreeSet<_> = dd_lines(src).into_iter().filter(|e| e.0 >= 4).collect();
        assert_eq!(dd, set(&[(4, 5, "x"), (6, 7, "x")]));
    }

    #[test]
    fn no_shared_variables() {
        let src = "void f(int a, int b)\n{\na = 1;\nb = 2;\n}";
        assert!(dd_lines(src).is_empty());
    }

    #[test]
    fn both_branch_defs_reach_join() {
        let src = "void f(int c, int a)\n{\nif (c)\n{ a = 1; }\nelse\n{ a = 2; }\nc = a;\n}";
        let dd = dd_lines(src);
        assert!(dd.contains(&(4, 7, "a".into())));
        assert!(dd.contains(&(6, 7, "a".into())));
        assert!(!dd.contains(&(1, 7, "a".into())));
    }

    #[test]
    fn may_defs_neither_generate_nor_kill() {
        let src = "void f()\n{\nint s;\ng(&s);\nh(s);\n}";
        let dd = dd_lines(src);
        assert!(dd.contains(&(3, 5, "s".into())));
        assert!(!dd.contains(&(4, 5, "s".into())));
    }

    #[test]
    fn orders_agree() {
        let src = "void f(int n)\n{\nint i; int s = 0;\nfor (i = 0; i < n; i++)\n{ if (i) { s = s + i; } }\nn = s;\n}";
        let p = lower_src(src);
        let f = &p.functions[0];
        let cfg = build_cfg(f);
        let base = data_dependence(&cfg, &f.statements);
        assert_eq!(
            base,
            data_dependence_with_order(&cfg, &f.statements, WorklistOrder::Reverse)
        );
        assert_eq!(
            base,
            data_dependence_with_order(&cfg, &f.statements, WorklistOrder::Shuffled(7))
        );
    }
}
