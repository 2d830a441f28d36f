//! Paragraph-vector embedder: gradient check and embedding geometry.

use mvd::embedder::{pvdm_loss_grad, text_tokens, train_doc2vec, Doc2VecConfig, EMPTY_TOKEN};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || rng.gen_range(-1.0..1.0))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn pvdm_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (v, d, h) = (5, 6, 1e-6);
    for _ in 0..10 {
        let doc: Array1<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let words = random_matrix(&mut rng, v, d);
        let output = random_matrix(&mut rng, v, d);
        let ctx = [1, 3, 3];
        let (target, negs) = (2, [0, 4]);
        let g = pvdm_loss_grad(doc.view(), words.view(), output.view(), &ctx, target, &negs);
        let loss = |doc: &Array1<f64>, words: &Array2<f64>, output: &Array2<f64>| {
            pvdm_loss_grad(doc.view(), words.view(), output.view(), &ctx, target, &negs).loss
        };
        let mut worst: f64 = 0.0;
        for i in 0..d {
            let (mut p, mut m) = (doc.clone(), doc.clone());
            p[i] += h;
            m[i] -= h;
            let num = (loss(&p, &words, &output) - loss(&m, &words, &output)) / (2.0 * h);
            worst = worst.max(rel_err(num, g.doc[i]));
        }
        for r in 0..v {
            for c in 0..d {
                let (mut p, mut m) = (words.clone(), words.clone());
                p[[r, c]] += h;
                m[[r, c]] -= h;
                let num = (loss(&doc, &p, &output) - loss(&doc, &m, &output)) / (2.0 * h);
                worst = worst.max(rel_err(num, g.words[[r, c]]));
                let (mut p, mut m) = (output.clone(), output.clone());
                p[[r, c]] += h;
                m[[r, c]] -= h;
                let num = (loss(&doc, &words, &p) - loss(&doc, &words, &m)) / (2.0 * h);
                worst = worst.max(rel_err(num, g.output[[r, c]]));
            }
        }
        assert!(worst < 1e-4, "relative error {worst}");
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
fn disjoint_families_cluster_apart() {
    let alloc = [
        "p = malloc ( n ) ;",
        "q = malloc ( len + 1 ) ;",
        "buf = malloc ( size ) ;",
    ];
    let arith = ["i += step ;", "total -= delta ;", "k *= 2 ;"];
    let mut corpus = Vec::new();
    for _ in 0..20 {
        corpus.extend(alloc.iter().chain(&arith).map(|s| toks(s)));
    }
    let cfg = Doc2VecConfig {
        dim: 16,
        epochs: 30,
        ..Doc2VecConfig::default()
    };
    let model = train_doc2vec(&corpus, &cfg).unwrap();
    let a: Vec<Vec<f64>> = alloc.iter().map(|s| model.infer_vector(&toks(s))).collect();
    let b: Vec<Vec<f64>> = arith.iter().map(|s| model.infer_vector(&toks(s))).collect();
    let mean = |pairs: Vec<f64>| pairs.iter().sum::<f64>() / pairs.len() as f64;
    let within = |xs: &[Vec<f64>]| {
        let mut out = Vec::new();
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                out.push(cosine(&xs[i], &xs[j]));
            }
        }
        out
    };
    let intra = mean([within(&a), within(&b)].concat());
    let inter = mean(
        a.iter()
            .flat_map(|x| b.iter().map(|y| cosine(x, y)))
            .collect(),
    );
    assert!(intra > inter, "intra {intra} inter {inter}");
}

#[test]
fn smoothed_loss_does_not_increase() {
    let corpus: Vec<Vec<String>> = ["a = b ;", "free ( a ) ;", "if ( a ) {", "b = a + 1 ;"]
        .iter()
        .map(|s| toks(s))
        .collect();
    let model = train_doc2vec(
        &corpus,
        &Doc2VecConfig {
            dim: 8,
            epochs: 40,
            ..Doc2VecConfig::default()
        },
    )
    .unwrap();
    let smooth: Vec<f64> = model
        .loss_history
        .windows(5)
        .map(|w| w.iter().sum::<f64>() / 5.0)
        .collect();
    assert!(smooth.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{smooth:?}");
}

#[test]
fn token_examples() {
    assert_eq!(text_tokens("free(p);", false), toks("free ( p ) ;"));
    assert_eq!(text_tokens("x = y + 1;", false), toks("x = y + 1 ;"));
    assert_eq!(text_tokens("", false), vec![EMPTY_TOKEN.to_string()]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn inferred_vectors_are_finite_and_repeatable(words in prop::collection::vec("[a-z()*;=]{1,4}", 0..8)) {
        let corpus = vec![toks("p = malloc ( n ) ;"), toks("free ( p ) ;")];
        let model = train_doc2vec(&corpus, &Doc2VecConfig { dim: 12, epochs: 3, ..Doc2VecConfig::default() }).unwrap();
        let v = model.infer_vector(&words);
        prop_assert_eq!(v.len(), 12);
        prop_assert!(v.iter().all(|x| x.is_finite()));
        prop_assert_eq!(v, model.infer_vector(&words));
    }
}
