//! Post-dominators and control dependence.

use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;

use super::cfg::{Cfg, EXIT};
use crate::frontend::NodeId;

/// `pdom[n]` holds every node that post-dominates `n`, including `n` itself.
pub fn post_dominators(cfg: &Cfg) -> Vec<FixedBitSet> {
    let n = cfg.len();
    let mut full = FixedBitSet::with_capacity(n);
    full.insert_range(..);
    let mut pdom = vec![full; n];
    pdom[EXIT].clear();
    pdom[EXIT].insert(EXIT);
    let mut changed = true;
    while changed {
        changed = false;
        for v in (0..n).rev().filter(|&v| v != EXIT) {
            let mut next = FixedBitSet::with_capacity(n);
            let succ = cfg.successors(v);
            if let Some((&first, rest)) = succ.split_first() {
                next = pdom[first].clone();
                for &s in rest {
                    next.intersect_with(&pdom[s]);
                }
            }
            next.insert(v);
            if next != pdom[v] {
                pdom[v] = next;
                changed = true;
            }
        }
    }
    pdom
}

/// Immediate post-dominator of every node; `None` for the exit.
pub fn immediate_post_dominators(cfg: &Cfg) -> Vec<Option<usize>> {
    let pdom = post_dominators(cfg);
    (0..cfg.len())
        .map(|v| {
            let depth = pdom[v].count_ones(..);
            pdom[v]
                .ones()
                .find(|&p| p != v && pdom[p].count_ones(..) + 1 == depth)
        })
        .collect()
}

/// Control dependence pairs `(controller, dependent)` over CFG indices,
/// including the synthetic entry and loop self-dependences.
pub fn control_dependence_indices(cfg: &Cfg) -> BTreeSet<(usize, usize)> {
    let pdom = post_dominators(cfg);
    let ipdom = immediate_post_dominators(cfg);
    let mut out = BTreeSet::new();
    for a in 0..cfg.len() {
        for &b in cfg.successors(a) {
            // a self-loop still makes `a` depend on itself
            if b != a && pdom[a].contains(b) {
                continue;
            }
            let stop = ipdom[a];
            let mut t = Some(b);
            while let Some(cur) = t {
                if Some(cur) == stop {
                    break;
                }
                out.insert((a, cur));
                t = ipdom[cur];
            }
        }
    }
    out
}

pub fn control_dependence(cfg: &Cfg) -> BTreeSet<(NodeId, NodeId)> {
    control_dependence_with(cfg, false)
}

/// Statement-level control dependence. `include_self` keeps loop-carried
/// self-dependences such as `(while (c), while (c))`.
pub fn control_dependence_with(cfg: &Cfg, include_self: bool) -> BTreeSet<(NodeId, NodeId)> {
    control_dependence_indices(cfg)
        .into_iter()
        .filter_map(|(a, b)| Some((cfg.stmt(a)?, cfg.stmt(b)?)))
        .filter(|(a, b)| include_self || a != b)
        .collect()
}
