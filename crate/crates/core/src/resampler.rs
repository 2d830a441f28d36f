//! Minority oversampling on node embeddings: SMOTE-style interpolation plus
//! a bilinear edge generator that wires synthetic nodes into the graph.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::depgraph::DepKind;
use crate::fsgnn::{Augmentation, GraphInput, SyntheticNode};

pub const VULNERABLE: usize = 1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ResamplerError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("no edges to train the edge generator on")]
    NoEdges,
}

/// Link predictor `σ(h_aᵀ S h_b)` with an acceptance threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGenerator {
    pub s: Array2<f64>,
    pub threshold: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl EdgeGenerator {
    /// Zero weights: every pair scores exactly 0.5.
    pub fn new(dim: usize, threshold: f64) -> Self {
        EdgeGenerator {
            s: Array2::zeros((dim, dim)),
            threshold,
        }
    }

    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    pub fn edge_prob(&self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64, ResamplerError> {
        for v in [&a, &b] {
            if v.len() != self.dim() {
                return Err(ResamplerError::Dimension {
                    expected: self.dim(),
                    got: v.len(),
                });
            }
        }
        Ok(sigmoid(a.dot(&self.s.dot(&b))))
    }
}

/// A synthetic minority node and its interpolated embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub node: SyntheticNode,
    pub embedding: Array1<f64>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index in `candidates` closest to `target`, skipping `exclude`; ties go to
/// the earlier candidate.
fn nearest(
    h: ArrayView2<f64>,
    target: ArrayView1<f64>,
    candidates: &[usize],
    exclude: usize,
) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for &c in candidates {
        if c == exclude {
            continue;
        }
        let d = sq_dist(h.row(c), target);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, c));
        }
    }
    best.map(|(_, c)| c)
}

/// Interpolates `round(scale * m)` new nodes among the `m` vulnerable ones,
/// cycling over them in index order.
pub fn smote_nodes(
    h: ArrayView2<f64>,
    labels: &[Option<usize>],
    scale: f64,
    rng: &mut impl Rng,
) -> Vec<Synthetic> {
    let minority: Vec<usize> = (0..h.nrows())
        .filter(|&i| labels.get(i).copied().flatten() == Some(VULNERABLE))
        .collect();
    if minority.is_empty() || scale <= 0.0 {
        return Vec::new();
    }
    let count = (scale * minority.len() as f64).round() as usize;
    let neighbors: Vec<usize> = minority
        .iter()
        .map(|&v| nearest(h, h.row(v), &minority, v).unwrap_or(v))
        .collect();
    (0..count)
        .map(|k| {
            let i = k % minority.len();
            let (source, neighbor) = (minority[i], neighbors[i]);
            let delta: f64 = if neighbor == source {
                0.0
            } else {
                rng.gen_range(0.0..=1.0)
            };
            let embedding = &h.row(source) + &((&h.row(neighbor) - &h.row(source)) * delta);
            Synthetic {
                node: SyntheticNode {
                    source,
                    neighbor,
                    delta,
                },
                embedding,
            }
        })
        .collect()
}

/// Control edges from each synthetic node (index `n + i`) to its source and
/// to the real node nearest its embedding, kept when the predicted
/// probability exceeds the threshold. A node with no accepted edge is linked
/// to its source.
pub fn generate_edges(
    gen: &EdgeGenerator,
    h: ArrayView2<f64>,
    synthetic: &[Synthetic],
) -> Result<Vec<(usize, usize, DepKind)>, ResamplerError> {
    let n = h.nrows();
    let all: Vec<usize> = (0..n).collect();
    let mut edges = Vec::new();
    for (i, s) in synthetic.iter().enumerate() {
        let id = n + i;
        let source = s.node.source;
        let mut targets = vec![source];
        targets.extend(nearest(h, s.embedding.view(), &all, source));
        let before = edges.len();
        for t in targets {
            if gen.edge_prob(s.embedding.view(), h.row(t))? > gen.threshold {
                edges.push((id, t, DepKind::Control));
            }
        }
        if edges.len() == before {
            edges.push((id, source, DepKind::Control));
        }
    }
    Ok(edges)
}

/// Full resampling step for one graph.
pub fn augment(
    gen: &EdgeGenerator,
    h: ArrayView2<f64>,
    labels: &[Option<usize>],
    scale: f64,
    rng: &mut impl Rng,
) -> Result<Augmentation, ResamplerError> {
    let synthetic = smote_nodes(h, labels, scale, rng);
    let edges = generate_edges(gen, h, &synthetic)?;
    Ok(Augmentation {
        synthetic: synthetic.into_iter().map(|s| s.node).collect(),
        edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for EdgeTrainConfig {
    fn default() -> Self {
        EdgeTrainConfig {
            epochs: 1,
            lr: 0.01,
            seed: 0,
        }
    }
}

/// Binary cross-entropy SGD over real edges (positives) and an equal number
/// of sampled non-adjacent pairs per graph. Returns the mean loss per epoch.
pub fn train_edge_generator(
    gen: &mut EdgeGenerator,
    graphs: &[(ArrayView2<f64>, &GraphInput)],
    config: &EdgeTrainConfig,
) -> Result<Vec<f64>, ResamplerError> {
    if graphs.iter().all(|(_, g)| g.edges().is_empty()) {
        return Err(ResamplerError::NoEdges);
    }
    for (h, _) in graphs {
        if h.ncols() != gen.dim() {
            return Err(ResamplerError::Dimension {
                expected: gen.dim(),
                got: h.ncols(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let mut examples: Vec<(usize, usize, usize, f64)> = Vec::new();
        for (gi, (h, g)) in graphs.iter().enumerate() {
            let n = h.nrows();
            let mut adjacent = std::collections::HashSet::new();
            for &(u, v, _) in g.edges() {
                if adjacent.insert((u, v)) {
                    examples.push((gi, u, v, 1.0));
                }
            }
            let free = n * n.saturating_sub(1) - adjacent.len();
            let wanted = adjacent.len().min(free);
            let mut negatives = std::collections::HashSet::new();
            while negatives.len() < wanted {
                let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
                if u != v && !adjacent.contains(&(u, v)) && negatives.insert((u, v)) {
                    examples.push((gi, u, v, 0.0));
                }
            }
        }
        examples.shuffle(&mut rng);
        let mut total = 0.0;
        for &(gi, u, v, y) in &examples {
            let h = graphs[gi].0;
            let (a, b) = (h.row(u), h.row(v));
            let p = sigmoid(a.dot(&gen.s.dot(&b)));
            total -= if y > 0.5 {
                p.max(1e-12).ln()
            } else {
                (1.0 - p).max(1e-12).ln()
            };
            // d loss / dS = (p - y) a bᵀ
            let scale = -config.lr * (p - y);
            for (i, &ai) in a.iter().enumerate() {
                gen.s.row_mut(i).scaled_add(scale * ai, &b);
            }
        }
        history.push(total / examples.len().max(1) as f64);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(5)
    }

    #[test]
    fn edge_prob_examples() {
        let mut g = EdgeGenerator::new(2, 0.5);
        let x = array![1.0, 1.0];
        assert_eq!(g.edge_prob(x.view(), x.view()).unwrap(), 0.5);
        g.s = Array2::eye(2);
        let e = array![1.0, 0.0];
        assert!((g.edge_prob(e.view(), e.view()).unwrap() - 0.731_058_578_630_004_9).abs() < 1e-15);
        g.s = array![[1.0, 0.0], [0.0, 2.0]];
        // 1·1·1 + 1·2·1 = 3
        assert!(
            (g.edge_prob(x.view(), x.view()).unwrap() - 1.0 / (1.0 + (-3.0f64).exp())).abs()
                < 1e-15
        );
        assert!(g.edge_prob(array![1.0].view(), x.view()).is_err());
    }

    #[test]
    fn midpoint_and_counts() {
        let h = array![[0.0, 0.0], [1.0, 1.0], [5.0, 5.0], [9.0, 9.0]];
        let labels = [Some(1), Some(1), Some(0), Some(1)];
        let s = smote_nodes(h.view(), &labels, 1.0, &mut rng());
        assert_eq!(s.len(), 3);
        assert_eq!((s[0].node.source, s[0].node.neighbor), (0, 1));
        assert_eq!((s[2].node.source, s[2].node.neighbor), (3, 1));
        let d = s[0].node.delta;
        assert_eq!(s[0].embedding, array![d, d]);
        assert_eq!(smote_nodes(h.view(), &labels, 0.5, &mut rng()).len(), 2);
        assert!(smote_nodes(h.view(), &[Some(0); 4], 1.0, &mut rng()).is_empty());
    }

    #[test]
    fn single_minority_node_is_copied() {
        let h = array![[0.3, 0.4], [1.0, 1.0]];
        let s = smote_nodes(h.view(), &[Some(1), Some(0)], 2.0, &mut rng());
        assert_eq!(s.len(), 2);
        assert!(s
            .iter()
            .all(|x| x.embedding == array![0.3, 0.4] && x.node.neighbor == 0));
    }

    #[test]
    fn fallback_and_full_connection() {
        let h = array![[1.0, 0.0], [0.0, 1.0], [0.9, 0.1]];
        let syn = smote_nodes(h.view(), &[Some(1), Some(0), Some(0)], 1.0, &mut rng());
        let mut g = EdgeGenerator::new(2, 0.5);
        assert_eq!(
            generate_edges(&g, h.view(), &syn).unwrap(),
            vec![(3, 0, DepKind::Control)]
        );
        g.s = Array2::eye(2) * 100.0;
        let e = generate_edges(&g, h.view(), &syn).unwrap();
        assert_eq!(e, vec![(3, 0, DepKind::Control), (3, 2, DepKind::Control)]);
    }

    #[test]
    fn complete_graph_pushes_probabilities_up() {
        let h = array![[0.5, 0.1], [0.2, 0.4], [0.3, 0.3]];
        let g = GraphInput::new(
            3,
            (0..3).flat_map(|u| (0..3).map(move |v| (u, v, DepKind::Data))),
        );
        let mut gen = EdgeGenerator::new(2, 0.5);
        let cfg = EdgeTrainConfig {
            epochs: 30,
            lr: 0.5,
            seed: 1,
        };
        let losses = train_edge_generator(&mut gen, &[(h.view(), &g)], &cfg).unwrap();
        assert!(losses.last().unwrap() < &losses[0]);
        assert!(gen.edge_prob(h.row(0), h.row(1)).unwrap() > 0.5);
    }

    #[test]
    fn edgeless_corpus_is_an_error() {
        let h = array![[0.5, 0.1]];
        let g = GraphInput::new(1, []);
        let mut gen = EdgeGenerator::new(2, 0.5);
        assert_eq!(
            train_edge_generator(&mut gen, &[(h.view(), &g)], &EdgeTrainConfig::default()),
            Err(ResamplerError::NoEdges)
        );
    }
}
