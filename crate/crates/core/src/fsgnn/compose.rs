//! Node-relation composition operators and their derivatives.

use serde::{Deserialize, Serialize};

use super::FsgnnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompositionOp {
    Sub,
    Mult,
    #[default]
    Ccorr,
}

impl std::str::FromStr for CompositionOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sub" => Ok(CompositionOp::Sub),
            "mult" => Ok(CompositionOp::Mult),
            "ccorr" => Ok(CompositionOp::Ccorr),
            other => Err(format!("unknown composition operator `{other}`")),
        }
    }
}

pub fn compose(x: &[f64], z: &[f64], op: CompositionOp) -> Result<Vec<f64>, FsgnnError> {
    if x.len() != z.len() {
        return Err(FsgnnError::Dimension {
            expected: x.len(),
            got: z.len(),
        });
    }
    let mut out = vec![0.0; x.len()];
    compose_into(x, z, op, &mut out);
    Ok(out)
}

/// Adds `φ(x, z)` to `out`.
pub fn compose_into(x: &[f64], z: &[f64], op: CompositionOp, out: &mut [f64]) {
    match op {
        CompositionOp::Sub => {
            for ((o, a), b) in out.iter_mut().zip(x).zip(z) {
                *o += a - b;
            }
        }
        CompositionOp::Mult => {
            for ((o, a), b) in out.iter_mut().zip(x).zip(z) {
                *o += a * b;
            }
        }
        CompositionOp::Ccorr => ccorr_add(x, z, out),
    }
}

/// `out[k] += Σ_i x[i] · z[(k + i) mod d]`, split into two contiguous dot
/// products per output entry.
fn ccorr_add(x: &[f64], z: &[f64], out: &mut [f64]) {
    let d = x.len();
    for (k, o) in out.iter_mut().enumerate() {
        let head: f64 = x[..d - k].iter().zip(&z[k..]).map(|(a, b)| a * b).sum();
        let tail: f64 = x[d - k..].iter().zip(&z[..k]).map(|(a, b)| a * b).sum();
        *o += head + tail;
    }
}

/// Accumulates the gradients of `<g, φ(x, z)>` into `dx` and `dz`.
pub fn compose_backward(
    x: &[f64],
    z: &[f64],
    op: CompositionOp,
    g: &[f64],
    dx: &mut [f64],
    dz: &mut [f64],
) {
    match op {
        CompositionOp::Sub => {
            for i in 0..g.len() {
                dx[i] += g[i];
                dz[i] -= g[i];
            }
        }
        CompositionOp::Mult => {
            for i in 0..g.len() {
                dx[i] += g[i] * z[i];
                dz[i] += g[i] * x[i];
            }
        }
        CompositionOp::Ccorr => {
            let d = g.len();
            // dx[i] = Σ_k g[k] z[(k + i) mod d], itself a correlation
            ccorr_add(g, z, dx);
            // dz[j] = Σ_k g[k] x[(j - k) mod d]; with xr[m] = x[(-m) mod d]
            // this is ccorr(g, xr) read at index (d - j) mod d
            let xr: Vec<f64> = (0..d).map(|m| x[(d - m) % d]).collect();
            let mut tmp = vec![0.0; d];
            ccorr_add(g, &xr, &mut tmp);
            for j in 0..d {
                dz[j] += tmp[(d - j) % d];
            }
        }
    }
}
