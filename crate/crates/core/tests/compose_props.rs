//! Composition operators against direct loops.

mod support;

use mvd::fsgnn::{compose, CompositionOp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::ccorr_loop;

#[test]
fn ccorr_equals_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for d in [2, 7, 100] {
        for _ in 0..100 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let got = compose(&x, &z, CompositionOp::Ccorr).unwrap();
            for (a, b) in got.iter().zip(ccorr_loop(&x, &z)) {
                assert!((a - b).abs() <= 1e-12, "d={d}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn small_examples() {
    assert_eq!(
        compose(&[1.0, 0.0], &[3.0, 5.0], CompositionOp::Ccorr).unwrap(),
        vec![3.0, 5.0]
    );
    assert_eq!(
        compose(&[1.0, 2.0], &[3.0, 4.0], CompositionOp::Ccorr).unwrap(),
        vec![11.0, 10.0]
    );
    assert_eq!(
        compose(&[1.0, 2.0], &[3.0, 4.0], CompositionOp::Sub).unwrap(),
        vec![-2.0, -2.0]
    );
    assert_eq!(
        compose(&[1.0, 2.0], &[3.0, 4.0], CompositionOp::Mult).unwrap(),
        vec![3.0, 8.0]
    );
    assert!(compose(&[1.0], &[3.0, 4.0], CompositionOp::Mult).is_err());
}
