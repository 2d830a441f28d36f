//! Direct-call graph over a lowered program.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::frontend::{LoweredProgram, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CallSite {
    pub caller: String,
    pub site: NodeId,
    pub callee: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallGraph {
    /// Calls resolved to a function defined in the program.
    pub resolved: BTreeSet<CallSite>,
    /// Calls to names with no definition (library or system APIs).
    pub external: BTreeSet<CallSite>,
}

impl CallGraph {
    pub fn callees_of(&self, site: NodeId) -> impl Iterator<Item = &str> {
        self.resolved
            .iter()
            .filter(move |c| c.site == site)
            .map(|c| c.callee.as_str())
    }
}

pub fn build_call_graph(program: &LoweredProgram) -> CallGraph {
    let defined: HashSet<&str> = program.functions.iter().map(|f| f.name.as_str()).collect();
    let mut graph = CallGraph::default();
    for s in program.statements() {
        for callee in &s.calls {
            let site = CallSite {
                caller: s.function.clone(),
                site: s.id,
                callee: callee.clone(),
            };
            if defined.contains(callee.as_str()) {
                graph.resolved.insert(site);
            } else {
                graph.external.insert(site);
            }
        }
    }
    graph
}
