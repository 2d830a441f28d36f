//! One flow-sensitive message-passing layer.
//!
//! Row-vector convention: node states are rows of `H` and weights map
//! `d_in -> d_out` by right multiplication.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::compose::{compose_backward, compose_into, CompositionOp};
use super::graph::GraphInput;
use super::relations::{Relation, SELF_INDEX};
use super::FsgnnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// Weight for messages along original edges.
    pub w_out: Array2<f64>,
    /// Weight for messages along inverse edges.
    pub w_in: Array2<f64>,
    pub w_self: Array2<f64>,
    /// Relation projection applied to the relation vectors.
    pub w_rel: Array2<f64>,
}

impl LayerParams {
    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        let z = || Array2::zeros((d_in, d_out));
        LayerParams {
            w_out: z(),
            w_in: z(),
            w_self: z(),
            w_rel: z(),
        }
    }

    pub fn d_in(&self) -> usize {
        self.w_out.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.w_out.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSettings {
    pub op: CompositionOp,
    pub activation: Activation,
    pub mean_agg: bool,
}

/// Intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub h_in: Array2<f64>,
    pub z_in: Array2<f64>,
    agg_out: Array2<f64>,
    agg_in: Array2<f64>,
    agg_self: Array2<f64>,
    scale: Array1<f64>,
    /// Activation output before dropout.
    act: Array2<f64>,
    mask: Option<Array2<f64>>,
    pub h_out: Array2<f64>,
    pub z_out: Array2<f64>,
}

pub struct LayerGrads {
    pub params: LayerParams,
    pub h_in: Array2<f64>,
    pub z_in: Array2<f64>,
}

fn row(a: &Array2<f64>, i: usize) -> &[f64] {
    a.row(i).to_slice().expect("standard layout")
}

/// Runs the layer. `dropout` is `(rate, rng)` in training mode.
pub fn layer_forward(
    graph: &GraphInput,
    h: ArrayView2<f64>,
    z: ArrayView2<f64>,
    params: &LayerParams,
    settings: LayerSettings,
    dropout: Option<(f64, &mut dyn rand::RngCore)>,
) -> Result<LayerTrace, FsgnnError> {
    let n = graph.num_nodes;
    let d = params.d_in();
    if h.ncols() != d || z.ncols() != d || h.nrows() != n {
        return Err(FsgnnError::Dimension {
            expected: d,
            got: h.ncols(),
        });
    }
    let h = h.as_standard_layout().into_owned();
    let z = z.as_standard_layout().into_owned();
    let mut agg_out = Array2::zeros((n, d));
    let mut agg_in = Array2::zeros((n, d));
    let mut agg_self = Array2::zeros((n, d));
    let op = settings.op;
    for &(u, v, kind) in graph.edges() {
        let r = Relation::Base(kind);
        if graph.sends(u) {
            compose_into(
                row(&h, u),
                row(&z, r.index()),
                op,
                agg_out.row_mut(v).into_slice().unwrap(),
            );
        }
        if graph.sends(v) {
            compose_into(
                row(&h, v),
                row(&z, r.inverse().index()),
                op,
                agg_in.row_mut(u).into_slice().unwrap(),
            );
        }
    }
    for v in 0..n {
        compose_into(
            row(&h, v),
            row(&z, SELF_INDEX),
            op,
            agg_self.row_mut(v).into_slice().unwrap(),
        );
    }
    let scale: Array1<f64> = if settings.mean_agg {
        graph.degrees().iter().map(|&c| 1.0 / c as f64).collect()
    } else {
        Array1::ones(n)
    };
    let mut pre =
        agg_out.dot(&params.w_out) + agg_in.dot(&params.w_in) + agg_self.dot(&params.w_self);
    if settings.mean_agg {
        pre *= &scale.view().insert_axis(Axis(1));
    }
    let act = match settings.activation {
        Activation::Tanh => pre.mapv(f64::tanh),
        Activation::Identity => pre,
    };
    let mask = match dropout {
        Some((rate, rng)) if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            Some(Array2::from_shape_simple_fn(act.raw_dim(), || {
                if rng.gen::<f64>() < rate {
                    0.0
                } else {
                    keep
                }
            }))
        }
        _ => None,
    };
    let h_out = match &mask {
        Some(m) => &act * m,
        None => act.clone(),
    };
    let z_out = z.dot(&params.w_rel);
    if h_out.iter().chain(z_out.iter()).any(|x| !x.is_finite()) {
        return Err(FsgnnError::NonFinite);
    }
    Ok(LayerTrace {
        h_in: h,
        z_in: z,
        agg_out,
        agg_in,
        agg_self,
        scale,
        act,
        mask,
        h_out,
        z_out,
    })
}

/// Gradients of the layer given upstream gradients of `h_out` and `z_out`.
pub fn layer_backward(
    graph: &GraphInput,
    trace: &LayerTrace,
    params: &LayerParams,
    settings: LayerSettings,
    d_h_out: ArrayView2<f64>,
    d_z_out: ArrayView2<f64>,
) -> LayerGrads {
    let mut d_act = d_h_out.to_owned();
    if let Some(m) = &trace.mask {
        d_act *= m;
    }
    let mut d_pre = match settings.activation {
        Activation::Tanh => d_act * &trace.act.mapv(|a| 1.0 - a * a),
        Activation::Identity => d_act,
    };
    if settings.mean_agg {
        d_pre *= &trace.scale.view().insert_axis(Axis(1));
    }
    let grads = LayerParams {
        w_out: trace.agg_out.t().dot(&d_pre),
        w_in: trace.agg_in.t().dot(&d_pre),
        w_self: trace.agg_self.t().dot(&d_pre),
        w_rel: trace.z_in.t().dot(&d_z_out),
    };
    let d_agg_out = d_pre.dot(&params.w_out.t());
    let d_agg_in = d_pre.dot(&params.w_in.t());
    let d_agg_self = d_pre.dot(&params.w_self.t());

    let d = trace.h_in.ncols();
    let mut d_h = Array2::zeros(trace.h_in.raw_dim());
    let mut d_z = d_z_out
        .dot(&params.w_rel.t())
        .as_standard_layout()
        .into_owned();
    let (h, z, op) = (&trace.h_in, &trace.z_in, settings.op);
    let mut dz_r = vec![0.0; d];
    let mut accumulate =
        |x: usize, r: usize, g: &[f64], d_h: &mut Array2<f64>, d_z: &mut Array2<f64>| {
            dz_r.fill(0.0);
            compose_backward(
                row(h, x),
                row(z, r),
                op,
                g,
                d_h.row_mut(x).into_slice().unwrap(),
                &mut dz_r,
            );
            d_z.row_mut(r)
                .iter_mut()
                .zip(&dz_r)
                .for_each(|(a, b)| *a += b);
        };
    for &(u, v, kind) in graph.edges() {
        let r = Relation::Base(kind);
        if graph.sends(u) {
            accumulate(u, r.index(), row(&d_agg_out, v), &mut d_h, &mut d_z);
        }
        if graph.sends(v) {
            accumulate(
                v,
                r.inverse().index(),
                row(&d_agg_in, u),
                &mut d_h,
                &mut d_z,
            );
        }
    }
    for v in 0..graph.num_nodes {
        accumulate(v, SELF_INDEX, row(&d_agg_self, v), &mut d_h, &mut d_z);
    }
    LayerGrads {
        params: grads,
        h_in: d_h,
        z_in: d_z,
    }
}
