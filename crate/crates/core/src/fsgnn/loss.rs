//! Cross-entropy over labeled nodes.

use ndarray::Array2;

pub const PROB_FLOOR: f64 = 1e-12;

/// Summed negative log-likelihood over labeled rows, and the number of them.
pub fn cross_entropy(probs: &Array2<f64>, targets: &[Option<usize>]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0;
    for (row, t) in probs.rows().into_iter().zip(targets) {
        if let Some(k) = t {
            sum -= row[*k].max(PROB_FLOOR).ln();
            count += 1;
        }
    }
    (sum, count)
}

/// Gradient of `weight * cross_entropy` w.r.t. the logits that produced `probs`.
pub fn cross_entropy_grad(
    probs: &Array2<f64>,
    targets: &[Option<usize>],
    weight: f64,
) -> Array2<f64> {
    let mut d = Array2::zeros(probs.raw_dim());
    for (i, t) in targets.iter().enumerate() {
        if let Some(k) = t {
            for j in 0..probs.ncols() {
                let onehot = if j == *k { 1.0 } else { 0.0 };
                d[[i, j]] = weight * (probs[[i, j]] - onehot);
            }
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn unlabeled_rows_are_ignored() {
        let p = array![[0.25, 0.75], [0.5, 0.5]];
        let (l, n) = cross_entropy(&p, &[Some(1), None]);
        assert_eq!(n, 1);
        assert!((l + 0.75f64.ln()).abs() < 1e-15);
        let g = cross_entropy_grad(&p, &[Some(1), None], 2.0);
        assert_eq!(g, array![[0.5, -0.5], [0.0, 0.0]]);
    }

    #[test]
    fn zero_probability_is_clamped() {
        let (l, _) = cross_entropy(&array![[1.0, 0.0]], &[Some(1)]);
        assert!(l.is_finite());
    }
}
