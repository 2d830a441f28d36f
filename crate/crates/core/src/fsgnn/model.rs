//! Full network: relation bases, stacked layers, optional resampling before
//! the last layer, and a linear softmax classifier.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::compose::CompositionOp;
use super::graph::{Augmentation, GraphInput};
use super::layer::{
    layer_backward, layer_forward, Activation, LayerParams, LayerSettings, LayerTrace,
};
use super::relations::{Relation, NUM_RELATIONS};
use super::FsgnnError;
use crate::persist;

pub const NUM_CLASSES: usize = 2;
const MAGIC: &[u8; 8] = b"MVDGNN01";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub dim: usize,
    /// Message-passing layers before resampling; one more follows it.
    pub layers: usize,
    pub bases: usize,
    pub op: CompositionOp,
    pub activation: Activation,
    pub mean_agg: bool,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 100,
            layers: 2,
            bases: 4,
            op: CompositionOp::Ccorr,
            activation: Activation::Tanh,
            mean_agg: false,
            dropout: 0.1,
        }
    }
}

impl ModelConfig {
    fn settings(&self) -> LayerSettings {
        LayerSettings {
            op: self.op,
            activation: self.activation,
            mean_agg: self.mean_agg,
        }
    }
}

/// Every trainable tensor. Gradients use the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    /// Basis vectors, one per row (`B x d`).
    pub basis: Array2<f64>,
    /// Per-relation basis coefficients (`relations x B`).
    pub alpha: Array2<f64>,
    pub layers: Vec<LayerParams>,
    /// `d x classes`.
    pub classifier: Array2<f64>,
}

impl ParamSet {
    pub fn zeros(config: &ModelConfig) -> Self {
        let d = config.dim;
        ParamSet {
            basis: Array2::zeros((config.bases, d)),
            alpha: Array2::zeros((NUM_RELATIONS, config.bases)),
            layers: (0..=config.layers)
                .map(|_| LayerParams::zeros(d, d))
                .collect(),
            classifier: Array2::zeros((d, NUM_CLASSES)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        z
    }

    /// Tensors in a fixed order, used by the optimizer and persistence.
    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut out = vec![&self.basis, &self.alpha];
        for l in &self.layers {
            out.extend([&l.w_out, &l.w_in, &l.w_self, &l.w_rel]);
        }
        out.push(&self.classifier);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = vec![&mut self.basis, &mut self.alpha];
        for l in &mut self.layers {
            out.extend([&mut l.w_out, &mut l.w_in, &mut l.w_self, &mut l.w_rel]);
        }
        out.push(&mut self.classifier);
        out
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = vec!["basis".to_string(), "alpha".to_string()];
        for i in 0..self.layers.len() {
            for w in ["w_out", "w_in", "w_self", "w_rel"] {
                out.push(format!("layer{i}.{w}"));
            }
        }
        out.push("classifier".into());
        out
    }

    pub fn add_assign(&mut self, other: &ParamSet) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.tensors_mut().into_iter().for_each(|t| *t *= k);
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.tensors().iter().map(|t| t.dim()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamSet,
}

/// Resampling hook: sees the node states after the pre-resampling layers.
pub type Resample<'a> = dyn FnMut(ArrayView2<f64>, &GraphInput) -> Augmentation + 'a;

/// Everything recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub graph: GraphInput,
    pub augmentation: Option<Augmentation>,
    /// Graph seen by the post-resampling layer.
    pub final_graph: GraphInput,
    pub z0: Array2<f64>,
    pub layers: Vec<LayerTrace>,
    pub logits: Array2<f64>,
    pub probs: Array2<f64>,
}

impl ForwardTrace {
    /// Node states entering the resampling step.
    pub fn pre_resampling_states(&self) -> &Array2<f64> {
        &self.layers[self.layers.len() - 2].h_out
    }

    pub fn final_states(&self) -> &Array2<f64> {
        &self.layers.last().unwrap().h_out
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|x| (x - m).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

impl Model {
    pub fn new(config: ModelConfig, rng: &mut impl Rng) -> Self {
        let d = config.dim;
        let mut params = ParamSet::zeros(&config);
        params.basis = glorot(config.bases, d, rng);
        params.alpha = glorot(NUM_RELATIONS, config.bases, rng);
        for l in &mut params.layers {
            *l = LayerParams {
                w_out: glorot(d, d, rng),
                w_in: glorot(d, d, rng),
                w_self: glorot(d, d, rng),
                w_rel: glorot(d, d, rng),
            };
        }
        params.classifier = glorot(d, NUM_CLASSES, rng);
        Model { config, params }
    }

    /// Relation vectors `z_r = Σ_b α_br v_b`, one row per relation.
    pub fn relation_vectors(&self) -> Array2<f64> {
        self.params.alpha.dot(&self.params.basis)
    }

    pub fn edge_init(&self, r: Relation) -> Array1<f64> {
        self.params.alpha.row(r.index()).dot(&self.params.basis)
    }

    /// Runs the network. Dropout is active when `rng` is given; `resample`
    /// may add synthetic nodes before the last layer.
    pub fn forward(
        &self,
        graph: &GraphInput,
        x: ArrayView2<f64>,
        mut rng: Option<&mut dyn RngCore>,
        mut resample: Option<&mut Resample<'_>>,
    ) -> Result<ForwardTrace, FsgnnError> {
        if x.nrows() != graph.num_nodes || x.ncols() != self.config.dim {
            return Err(FsgnnError::Dimension {
                expected: self.config.dim,
                got: x.ncols(),
            });
        }
        let settings = self.config.settings();
        let z0 = self.relation_vectors();
        let mut layers: Vec<LayerTrace> = Vec::with_capacity(self.params.layers.len());
        let (mut h, mut z) = (x.to_owned(), z0.clone());
        let last = self.params.layers.len() - 1;
        let mut augmentation = None;
        let mut final_graph = graph.clone();
        for (l, p) in self.params.layers.iter().enumerate() {
            if l == last {
                if let Some(hook) = resample.as_deref_mut() {
                    let aug = hook(h.view(), graph);
                    h = interpolate(&h, &aug);
                    final_graph = aug.apply(graph);
                    augmentation = Some(aug);
                }
            }
            let g = if l == last { &final_graph } else { graph };
            let drop = match &mut rng {
                Some(r) => Some((self.config.dropout, &mut **r as &mut dyn RngCore)),
                None => None,
            };
            let t = layer_forward(g, h.view(), z.view(), p, settings, drop)?;
            h = t.h_out.clone();
            z = t.z_out.clone();
            layers.push(t);
        }
        let logits = h.dot(&self.params.classifier);
        let probs = softmax_rows(&logits);
        Ok(ForwardTrace {
            graph: graph.clone(),
            augmentation,
            final_graph,
            z0,
            layers,
            logits,
            probs,
        })
    }

    /// Reverse-mode gradients of a scalar loss given `d loss / d logits`.
    pub fn backward(&self, trace: &ForwardTrace, d_logits: ArrayView2<f64>) -> ParamSet {
        let settings = self.config.settings();
        let mut grads = self.params.zeros_like();
        let h_final = trace.final_states();
        grads.classifier = h_final.t().dot(&d_logits);
        let mut d_h = d_logits.dot(&self.params.classifier.t());
        let mut d_z = Array2::zeros(trace.z0.raw_dim());
        let last = trace.layers.len() - 1;
        for l in (0..trace.layers.len()).rev() {
            let g = if l == last {
                &trace.final_graph
            } else {
                &trace.graph
            };
            let lg = layer_backward(
                g,
                &trace.layers[l],
                &self.params.layers[l],
                settings,
                d_h.view(),
                d_z.view(),
            );
            grads.layers[l] = lg.params;
            d_h = lg.h_in;
            d_z = lg.z_in;
            if l == last {
                if let Some(aug) = &trace.augmentation {
                    d_h = interpolate_backward(&d_h, aug, trace.graph.num_nodes);
                }
            }
        }
        grads.alpha = d_z.dot(&self.params.basis.t());
        grads.basis = self.params.alpha.t().dot(&d_z);
        grads
    }

    pub fn save(&self, path: &Path) -> Result<(), FsgnnError> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, FsgnnError> {
        let header = Header {
            version: VERSION,
            dim: self.config.dim,
            layers: self.config.layers,
            bases: self.config.bases,
            op: self.config.op,
            activation: self.config.activation,
            relations: Relation::all().iter().map(|r| r.name()).collect(),
            config: self.config.clone(),
            tensors: self
                .params
                .tensor_names()
                .into_iter()
                .zip(self.params.shapes())
                .collect(),
        };
        let blobs: Vec<Array2<f64>> = self
            .params
            .tensors()
            .into_iter()
            .map(|t| t.as_standard_layout().into_owned())
            .collect();
        let slices: Vec<&[f64]> = blobs.iter().map(|b| b.as_slice().unwrap()).collect();
        let mut buf = Vec::new();
        persist::write_container(&mut buf, MAGIC, &header, &slices)?;
        Ok(buf)
    }

    pub fn load(path: &Path) -> Result<Self, FsgnnError> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FsgnnError> {
        let (h, arrays): (Header, Vec<Vec<f64>>) = persist::read_container(bytes, MAGIC)?;
        if h.version != VERSION {
            return Err(FsgnnError::Format(format!(
                "unsupported version {}",
                h.version
            )));
        }
        if h.relations.len() != NUM_RELATIONS {
            return Err(FsgnnError::Format("relation table mismatch".into()));
        }
        let mut params = ParamSet::zeros(&h.config);
        let expected = params.shapes();
        if arrays.len() != expected.len() {
            return Err(FsgnnError::Format("tensor count mismatch".into()));
        }
        for ((t, data), shape) in params.tensors_mut().into_iter().zip(arrays).zip(expected) {
            *t = Array2::from_shape_vec(shape, data)
                .map_err(|_| FsgnnError::Format("tensor size mismatch".into()))?;
        }
        Ok(Model {
            config: h.config,
            params,
        })
    }
}

fn interpolate(h: &Array2<f64>, aug: &Augmentation) -> Array2<f64> {
    let n = h.nrows();
    let mut out = Array2::zeros((n + aug.synthetic.len(), h.ncols()));
    out.slice_mut(ndarray::s![..n, ..]).assign(h);
    for (i, s) in aug.synthetic.iter().enumerate() {
        let row = &h.row(s.source) * (1.0 - s.delta) + &h.row(s.neighbor) * s.delta;
        out.row_mut(n + i).assign(&row);
    }
    out
}

fn interpolate_backward(d_h: &Array2<f64>, aug: &Augmentation, n: usize) -> Array2<f64> {
    let mut out = d_h.slice(ndarray::s![..n, ..]).to_owned();
    for (i, s) in aug.synthetic.iter().enumerate() {
        let g = d_h.row(n + i);
        out.row_mut(s.source).scaled_add(1.0 - s.delta, &g);
        out.row_mut(s.neighbor).scaled_add(s.delta, &g);
    }
    out
}

/// Row-wise `argmax` of class probabilities.
pub fn predictions(probs: &Array2<f64>) -> Vec<usize> {
    probs
        .axis_iter(Axis(0))
        .map(|r| usize::from(r[1] > r[0]))
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    dim: usize,
    layers: usize,
    bases: usize,
    op: CompositionOp,
    activation: Activation,
    relations: Vec<String>,
    config: ModelConfig,
    tensors: Vec<(String, (usize, usize))>,
}
