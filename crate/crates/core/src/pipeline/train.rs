//! Batch training of the embedder, the graph network and the edge generator.

use std::collections::{BTreeSet, HashMap};

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{LossNorm, TrainConfig};
use super::dataset::{GraphRecord, NodeRecord};
use super::{PipelineError, TrainedModel};
use crate::embedder::{text_tokens, train_doc2vec, Doc2VecModel};
use crate::fsgnn::{
    adam_step, cross_entropy, cross_entropy_grad, AdamState, ForwardTrace, FsgnnError, GraphInput,
    Model, ParamSet, Resample,
};
use crate::resampler::{augment, train_edge_generator, EdgeGenerator, EdgeTrainConfig, VULNERABLE};
use crate::slicer::PoiConfig;

/// A graph ready for the network: structure, node features, node targets.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedGraph {
    pub input: GraphInput,
    pub x: Array2<f64>,
    pub targets: Vec<Option<usize>>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub edge_gen: EdgeGenerator,
    /// Mean per-graph loss of each epoch.
    pub loss_history: Vec<f64>,
}

pub fn node_tokens(node: &NodeRecord, normalize: bool) -> Vec<String> {
    if normalize {
        text_tokens(&node.text, true)
    } else {
        node.tokens.clone()
    }
}

/// Trains paragraph vectors on the distinct statements of `records`.
pub fn train_embedder(
    records: &[GraphRecord],
    cfg: &TrainConfig,
) -> Result<Doc2VecModel, PipelineError> {
    let docs: BTreeSet<Vec<String>> = records
        .iter()
        .flat_map(|r| {
            r.nodes
                .iter()
                .map(|n| node_tokens(n, cfg.normalize_identifiers))
        })
        .collect();
    let docs: Vec<Vec<String>> = docs.into_iter().collect();
    Ok(train_doc2vec(&docs, &cfg.doc2vec_config())?)
}

/// Embeds every node (each distinct statement is inferred once) and builds
/// network inputs.
pub fn prepare(d2v: &Doc2VecModel, records: &[GraphRecord]) -> Vec<PreparedGraph> {
    let normalize = d2v.config.normalize_identifiers;
    let unique: BTreeSet<Vec<String>> = records
        .iter()
        .flat_map(|r| r.nodes.iter().map(|n| node_tokens(n, normalize)))
        .collect();
    let unique: Vec<Vec<String>> = unique.into_iter().collect();
    let vectors: Vec<Vec<f64>> = unique.par_iter().map(|t| d2v.infer_vector(t)).collect();
    let cache: HashMap<&Vec<String>, &Vec<f64>> = unique.iter().zip(&vectors).collect();
    let d = d2v.dim();
    records
        .iter()
        .map(|r| {
            let mut x = Array2::zeros((r.nodes.len(), d));
            for (i, n) in r.nodes.iter().enumerate() {
                let v = cache[&node_tokens(n, normalize)];
                x.row_mut(i)
                    .assign(&ArrayView2::from_shape((1, d), v).unwrap().row(0));
            }
            PreparedGraph {
                input: r.graph_input(),
                x,
                targets: r.targets(),
            }
        })
        .collect()
}

/// Cross-entropy over labeled nodes, normalized per graph (each graph's sum
/// divided by its node count, then summed over graphs) or globally.
pub fn graph_cross_entropy(
    probs: &[Array2<f64>],
    targets: &[Vec<Option<usize>>],
    norm: LossNorm,
) -> f64 {
    let total: usize = probs.iter().map(|p| p.nrows()).sum();
    probs
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let (sum, _) = cross_entropy(p, t);
            match norm {
                LossNorm::Graph => sum / p.nrows() as f64,
                LossNorm::Global => sum / total as f64,
            }
        })
        .sum()
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Step {
    trace: ForwardTrace,
    targets: Vec<Option<usize>>,
}

const SMOOTHING_WINDOW: usize = 5;

/// Consecutive groups of `size` graphs; the last group may be short.
pub fn batches(order: &[usize], size: usize) -> std::slice::Chunks<'_, usize> {
    order.chunks(size.max(1))
}

pub fn train_graphs(
    graphs: &[PreparedGraph],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, PipelineError> {
    cfg.validate()?;
    if graphs.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    if !graphs.iter().any(|g| g.targets.contains(&Some(VULNERABLE))) {
        return Err(PipelineError::NothingToLearn);
    }
    let mut model = Model::new(cfg.model_config(), &mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut gen = EdgeGenerator::new(cfg.node_dim, cfg.eta);
    let mut adam = AdamState::new(&model.params);
    let mut shuffle_rng = rng_for(cfg.seed, u64::MAX);
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    let mut history = Vec::new();
    let (mut best, mut stall) = (f64::INFINITY, 0);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in batches(&order, cfg.batch_size).enumerate() {
            let steps: Vec<Step> = batch
                .par_iter()
                .map(|&gi| {
                    let stream = ((epoch as u64) << 40 | gi as u64) << 1;
                    let mut drop_rng = rng_for(cfg.seed, stream);
                    let mut smote_rng = rng_for(cfg.seed, stream | 1);
                    let g = &graphs[gi];
                    let gen = &gen;
                    let mut hook = |h: ArrayView2<f64>, _: &GraphInput| {
                        augment(gen, h, &g.targets, cfg.oversample_scale, &mut smote_rng)
                            .expect("edge generator and node states share a dimension")
                    };
                    let resample: Option<&mut Resample<'_>> = if cfg.oversample_scale > 0.0 {
                        Some(&mut hook)
                    } else {
                        None
                    };
                    let trace =
                        model.forward(&g.input, g.x.view(), Some(&mut drop_rng), resample)?;
                    let mut targets = g.targets.clone();
                    targets.resize(trace.probs.nrows(), Some(VULNERABLE));
                    Ok(Step { trace, targets })
                })
                .collect::<Result<_, FsgnnError>>()?;

            let total_nodes: usize = steps.iter().map(|s| s.targets.len()).sum();
            let results: Vec<(f64, ParamSet)> = steps
                .par_iter()
                .map(|s| {
                    let w = match cfg.loss_norm {
                        LossNorm::Graph => 1.0 / s.targets.len() as f64,
                        LossNorm::Global => 1.0 / total_nodes as f64,
                    };
                    let (ce, _) = cross_entropy(&s.trace.probs, &s.targets);
                    let d_logits = cross_entropy_grad(&s.trace.probs, &s.targets, w);
                    (w * ce, model.backward(&s.trace, d_logits.view()))
                })
                .collect();
            let mut grads = model.params.zeros_like();
            let mut objective = 0.0;
            for (l, g) in &results {
                objective += l;
                grads.add_assign(g);
            }
            adam_step(
                &mut model.params,
                &grads,
                &mut adam,
                cfg.lr,
                cfg.weight_decay,
            );
            if !model.params.is_finite() {
                return Err(FsgnnError::NonFinite.into());
            }
            epoch_loss += match cfg.loss_norm {
                LossNorm::Graph => objective,
                LossNorm::Global => objective * batch.len() as f64,
            };

            if cfg.oversample_scale > 0.0 && cfg.edge_lr > 0.0 {
                let states: Vec<(ArrayView2<f64>, &GraphInput)> = steps
                    .iter()
                    .filter(|s| !s.trace.graph.edges().is_empty())
                    .map(|s| (s.trace.pre_resampling_states().view(), &s.trace.graph))
                    .collect();
                if !states.is_empty() {
                    let edge_cfg = EdgeTrainConfig {
                        epochs: 1,
                        lr: cfg.edge_lr,
                        seed: cfg.seed ^ ((epoch as u64) << 32 | b as u64),
                    };
                    train_edge_generator(&mut gen, &states, &edge_cfg)?;
                }
            }
        }
        let loss = epoch_loss / graphs.len() as f64;
        log::info!("epoch {}: loss {loss:.6}", epoch + 1);
        history.push(loss);

        let window = &history[history.len().saturating_sub(SMOOTHING_WINDOW)..];
        let smoothed = window.iter().sum::<f64>() / window.len() as f64;
        if best - smoothed > cfg.tolerance {
            best = smoothed;
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                log::info!("stopping: no improvement for {stall} epochs");
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model,
        edge_gen: gen,
        loss_history: history,
    })
}

/// Trains the embedder on the records, then the network on embedded graphs.
pub fn train(
    records: &[GraphRecord],
    cfg: &TrainConfig,
    poi: PoiConfig,
) -> Result<TrainedModel, PipelineError> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    if !records
        .iter()
        .any(|r| r.nodes.iter().any(|n| n.label == Some(1)))
    {
        return Err(PipelineError::NothingToLearn);
    }
    let doc2vec = train_embedder(records, cfg)?;
    let graphs = prepare(&doc2vec, records);
    let out = train_graphs(&graphs, cfg)?;
    Ok(TrainedModel {
        config: cfg.clone(),
        poi,
        doc2vec,
        gnn: out.model,
        edge_gen: out.edge_gen,
        loss_history: out.loss_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn loss_examples() {
        let uniform = |n| Array2::from_elem((n, 2), 0.5);
        let ln2 = std::f64::consts::LN_2;
        assert!(
            (graph_cross_entropy(&[uniform(1)], &[vec![Some(0)]], LossNorm::Graph) - ln2).abs()
                < 1e-15
        );
        let two = graph_cross_entropy(
            &[uniform(1), uniform(3)],
            &[vec![Some(1)], vec![Some(0); 3]],
            LossNorm::Graph,
        );
        assert!((two - 2.0 * ln2).abs() < 1e-15);
        let global = graph_cross_entropy(
            &[uniform(1), uniform(3)],
            &[vec![Some(1)], vec![Some(0); 3]],
            LossNorm::Global,
        );
        assert!((global - ln2).abs() < 1e-15);
        assert_eq!(
            graph_cross_entropy(&[array![[0.0, 1.0]]], &[vec![Some(1)]], LossNorm::Graph),
            0.0
        );
    }

    fn toy(label: usize) -> PreparedGraph {
        PreparedGraph {
            input: GraphInput::new(2, [(0, 1, crate::depgraph::DepKind::Data)]),
            x: array![[1.0, 0.0, 0.5, 0.0], [0.0, 1.0, 0.0, 0.5]],
            targets: vec![Some(0), Some(label)],
        }
    }

    fn small() -> TrainConfig {
        TrainConfig {
            node_dim: 4,
            epochs: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn rejects_data_without_positives() {
        assert!(matches!(
            train_graphs(&[toy(0)], &small()),
            Err(PipelineError::NothingToLearn)
        ));
        assert!(matches!(
            train_graphs(&[], &small()),
            Err(PipelineError::EmptyDataset)
        ));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let data = [toy(1), toy(0), toy(1)];
        let a = train_graphs(&data, &small()).unwrap();
        let b = train_graphs(&data, &small()).unwrap();
        assert_eq!(a.model.params, b.model.params);
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.edge_gen, b.edge_gen);
    }
}
