//! Oracles and generators shared by the property and acceptance suites.
#![allow(dead_code)]

use std::collections::BTreeSet;

use mvd::depgraph::{build_cfg, Cfg, DepKind};
use mvd::frontend::{lower, parse, tokenize, LoweredFunction, NodeId};
use mvd::fsgnn::*;
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const VARS: [&str; 3] = ["a", "b", "c"];

pub fn simple(rng: &mut ChaCha8Rng) -> String {
    let v = VARS[rng.gen_range(0..3)];
    let w = VARS[rng.gen_range(0..3)];
    match rng.gen_range(0..3) {
        0 => format!("{v} = {w} + 1;"),
        1 => format!("{v} = {w};"),
        _ => format!("{v} = 2;"),
    }
}

/// Appends up to `budget` statements; returns how many were used.
pub fn block(rng: &mut ChaCha8Rng, budget: usize, out: &mut Vec<String>) -> usize {
    let mut used = 0;
    while used < budget {
        let left = budget - used;
        let c = VARS[rng.gen_range(0..3)];
        match rng.gen_range(0..10) {
            0..=4 => {
                out.push(simple(rng));
                used += 1;
            }
            5 | 6 if left >= 2 => {
                out.push(format!("if ({c} > 0) {{"));
                let inner = rng.gen_range(1..left);
                used += 1 + block(rng, inner, out);
                if used < budget && rng.gen_bool(0.5) {
                    out.push("} else {".into());
                    let inner = rng.gen_range(1..=budget - used);
                    used += block(rng, inner, out);
                }
                out.push("}".into());
            }
            7 | 8 if left >= 2 => {
                out.push(format!("while ({c} < 5) {{"));
                let inner = rng.gen_range(1..left);
                used += 1 + block(rng, inner, out);
                out.push("}".into());
            }
            9 => {
                out.push(format!("return {c};"));
                used += 1;
                break;
            }
            _ => {}
        }
        if rng.gen_bool(0.3) {
            break;
        }
    }
    used
}

/// A random single-function program whose CFG has at most 8 nodes.
pub fn random_function(rng: &mut ChaCha8Rng) -> LoweredFunction {
    loop {
        let mut body = Vec::new();
        // entry, exit and the function's own entry statement take three slots
        block(rng, 5, &mut body);
        let src = format!("int f(int a, int b, int c)\n{{\n{}\n}}\n", body.join("\n"));
        let program = lower(&parse(&tokenize(&src).unwrap()).unwrap());
        let f = program.functions.into_iter().next().unwrap();
        if build_cfg(&f).len() <= 8 {
            return f;
        }
    }
}

/// Nodes reachable from `start` without passing through `blocked`.
pub fn reachable(cfg: &Cfg, start: usize, blocked: Option<usize>) -> Vec<bool> {
    let mut seen = vec![false; cfg.len()];
    if Some(start) == blocked {
        return seen;
    }
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(n) = stack.pop() {
        for &m in cfg.successors(n) {
            if !seen[m] && Some(m) != blocked {
                seen[m] = true;
                stack.push(m);
            }
        }
    }
    seen
}

/// `y` post-dominates `x`: every path from `x` to exit passes through `y`.
pub fn post_dominates(cfg: &Cfg, y: usize, x: usize) -> bool {
    x == y || !reachable(cfg, x, Some(y))[cfg.exit()]
}

/// `y` is control dependent on `x` when some successor of `x` is
/// post-dominated by `y` while `y` does not strictly post-dominate `x`.
pub fn brute_control(cfg: &Cfg) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for x in 0..cfg.len() {
        for y in 0..cfg.len() {
            let strict = x != y && post_dominates(cfg, y, x);
            if !strict && cfg.successors(x).iter().any(|&s| post_dominates(cfg, y, s)) {
                out.insert((x, y));
            }
        }
    }
    out
}

/// A definition of `v` at `d` reaches a use at `u` along some path of one or
/// more edges on which no intermediate node redefines `v`.
pub fn brute_data(cfg: &Cfg, f: &LoweredFunction) -> BTreeSet<(u32, u32, String)> {
    let at = |i: usize| cfg.stmt(i).and_then(|id| f.statement(id));
    let mut out = BTreeSet::new();
    for d in 0..cfg.len() {
        let Some(sd) = at(d) else { continue };
        for v in sd.must_defs() {
            let kills = |i: usize| at(i).is_some_and(|s| s.must_defs().any(|w| w == v));
            let mut seen = vec![false; cfg.len()];
            let mut stack: Vec<usize> = cfg.successors(d).to_vec();
            while let Some(n) = stack.pop() {
                if std::mem::replace(&mut seen[n], true) {
                    continue;
                }
                if let Some(su) = at(n) {
                    if su.uses.contains(v) {
                        out.insert((sd.id.0, su.id.0, v.clone()));
                    }
                }
                if !kills(n) {
                    stack.extend(cfg.successors(n));
                }
            }
        }
    }
    out
}

pub fn as_raw(edges: BTreeSet<(NodeId, NodeId, String)>) -> BTreeSet<(u32, u32, String)> {
    edges.into_iter().map(|(a, b, v)| (a.0, b.0, v)).collect()
}

pub const KINDS: [DepKind; 4] = [
    DepKind::Control,
    DepKind::Data,
    DepKind::Call,
    DepKind::Return,
];

pub fn config(dim: usize, op: CompositionOp, mean_agg: bool) -> ModelConfig {
    ModelConfig {
        dim,
        layers: 2,
        bases: 3,
        op,
        activation: Activation::Tanh,
        mean_agg,
        dropout: 0.2,
    }
}

pub fn random_graph(n: usize, rng: &mut impl Rng) -> GraphInput {
    let m = rng.gen_range(1..=2 * n);
    GraphInput::new(
        n,
        (0..m).map(|_| {
            (
                rng.gen_range(0..n),
                rng.gen_range(0..n),
                KINDS[rng.gen_range(0..4)],
            )
        }),
    )
}

pub fn random_x(n: usize, d: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || rng.gen_range(-1.0..1.0))
}

/// Loss of one forward pass with a fixed dropout stream and fixed augmentation.
pub fn loss_of(
    model: &Model,
    g: &GraphInput,
    x: ArrayView2<f64>,
    targets: &[Option<usize>],
    aug: &Option<Augmentation>,
    seed: u64,
) -> (f64, ForwardTrace) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hook = |_: ArrayView2<f64>, _: &GraphInput| aug.clone().unwrap();
    let resample: Option<&mut Resample<'_>> = if aug.is_some() { Some(&mut hook) } else { None };
    let t = model.forward(g, x, Some(&mut rng), resample).unwrap();
    let (sum, count) = cross_entropy(&t.probs, targets);
    (sum / count.max(1) as f64, t)
}

pub fn targets_for(n_total: usize, rng: &mut impl Rng) -> Vec<Option<usize>> {
    (0..n_total)
        .map(|_| match rng.gen_range(0..3) {
            0 => None,
            k => Some(k - 1),
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Worst relative error between backpropagated and central-difference
/// gradients over every parameter, for one random `n`-node graph.
pub fn gradient_check(
    seed: u64,
    n: usize,
    op: CompositionOp,
    mean_agg: bool,
    with_aug: bool,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 5;
    let model = Model::new(config(d, op, mean_agg), &mut rng);
    let g = random_graph(n, &mut rng);
    let x = random_x(n, d, &mut rng);
    let aug = with_aug.then(|| Augmentation {
        synthetic: vec![
            SyntheticNode {
                source: 0,
                neighbor: 2,
                delta: 0.3,
            },
            SyntheticNode {
                source: 1,
                neighbor: 1,
                delta: 0.7,
            },
        ],
        edges: vec![(n, 0, DepKind::Control), (n + 1, 3, DepKind::Control)],
    });
    let total = n + aug.as_ref().map_or(0, |a| a.synthetic.len());
    let targets = targets_for(total, &mut rng);
    let drop_seed = seed ^ 0xabc;
    let (_, trace) = loss_of(&model, &g, x.view(), &targets, &aug, drop_seed);
    let (_, count) = cross_entropy(&trace.probs, &targets);
    let d_logits = cross_entropy_grad(&trace.probs, &targets, 1.0 / count.max(1) as f64);
    let grads = model.backward(&trace, d_logits.view());

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let n_tensors = model.params.tensors().len();
    for ti in 0..n_tensors {
        let shape = model.params.tensors()[ti].dim();
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                let mut plus = model.clone();
                plus.params.tensors_mut()[ti][[i, j]] += h;
                let mut minus = model.clone();
                minus.params.tensors_mut()[ti][[i, j]] -= h;
                let lp = loss_of(&plus, &g, x.view(), &targets, &aug, drop_seed).0;
                let lm = loss_of(&minus, &g, x.view(), &targets, &aug, drop_seed).0;
                let numeric = (lp - lm) / (2.0 * h);
                let analytic = grads.tensors()[ti][[i, j]];
                worst = worst.max(rel_err(analytic, numeric));
            }
        }
    }
    worst
}

pub fn ccorr_loop(x: &[f64], z: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut out = vec![0.0; d];
    for (k, o) in out.iter_mut().enumerate() {
        for i in 0..d {
            *o += x[i] * z[(k + i) % d];
        }
    }
    out
}
