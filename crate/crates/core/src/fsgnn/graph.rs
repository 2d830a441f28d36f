//! Graph structure consumed by the network.

use serde::{Deserialize, Serialize};

use crate::depgraph::DepKind;

/// Nodes are `0..num_nodes`; edges are deduplicated and sorted. Nodes from
/// `first_synthetic` on are receive-only: they aggregate their neighbors but
/// send no messages, so real nodes never see synthetic ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphInput {
    pub num_nodes: usize,
    edges: Vec<(usize, usize, DepKind)>,
    first_synthetic: usize,
}

impl GraphInput {
    /// Self-edges and out-of-range endpoints are dropped.
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize, DepKind)>) -> Self {
        let mut edges: Vec<_> = edges
            .into_iter()
            .filter(|&(u, v, _)| u != v && u < num_nodes && v < num_nodes)
            .collect();
        edges.sort();
        edges.dedup();
        GraphInput {
            num_nodes,
            edges,
            first_synthetic: num_nodes,
        }
    }

    pub fn first_synthetic(&self) -> usize {
        self.first_synthetic
    }

    /// Whether node `x` passes messages along its edges.
    pub fn sends(&self, x: usize) -> bool {
        x < self.first_synthetic
    }

    pub fn edges(&self) -> &[(usize, usize, DepKind)] {
        &self.edges
    }

    /// Messages received per node, counting both edge directions and the
    /// self loop.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![1; self.num_nodes];
        for &(u, v, _) in &self.edges {
            deg[v] += usize::from(self.sends(u));
            deg[u] += usize::from(self.sends(v));
        }
        deg
    }
}

/// A synthetic node interpolated between two real nodes:
/// `h = (1 - delta) * h[source] + delta * h[neighbor]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticNode {
    pub source: usize,
    pub neighbor: usize,
    pub delta: f64,
}

/// Resampling output. Synthetic node `i` gets index `num_nodes + i`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Augmentation {
    pub synthetic: Vec<SyntheticNode>,
    pub edges: Vec<(usize, usize, DepKind)>,
}

impl Augmentation {
    pub fn apply(&self, graph: &GraphInput) -> GraphInput {
        let mut g = GraphInput::new(
            graph.num_nodes + self.synthetic.len(),
            graph
                .edges()
                .iter()
                .copied()
                .chain(self.edges.iter().copied()),
        );
        g.first_synthetic = graph.first_synthetic.min(graph.num_nodes);
        g
    }
}
