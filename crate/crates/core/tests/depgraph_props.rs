//! Dependence analyses checked against brute-force definitions on small
//! random programs.

mod support;

use mvd::depgraph::control::control_dependence_indices;
use mvd::depgraph::{build_cfg, data_dependence, data_dependence_with_order, WorklistOrder};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{as_raw, brute_control, brute_data, random_function};

#[test]
fn control_dependence_matches_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut nontrivial = 0;
    for _ in 0..200 {
        let f = random_function(&mut rng);
        let cfg = build_cfg(&f);
        assert!(cfg.len() <= 8 && cfg.is_well_formed());
        let got = control_dependence_indices(&cfg);
        assert_eq!(got, brute_control(&cfg), "{:?}", cfg.edges());
        nontrivial += usize::from(got.iter().any(|&(x, _)| x != cfg.entry()));
    }
    assert!(nontrivial > 50, "too few branching programs: {nontrivial}");
}

#[test]
fn data_dependence_matches_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut total = 0;
    for _ in 0..200 {
        let f = random_function(&mut rng);
        let cfg = build_cfg(&f);
        let got = as_raw(data_dependence(&cfg, &f.statements));
        assert_eq!(got, brute_data(&cfg, &f), "{:?}", cfg.edges());
        total += got.len();
    }
    assert!(total > 200, "too few data edges: {total}");
}

#[test]
fn data_dependence_ignores_worklist_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for t in 0..100 {
        let f = random_function(&mut rng);
        let cfg = build_cfg(&f);
        let base = data_dependence(&cfg, &f.statements);
        for order in [
            WorklistOrder::Reverse,
            WorklistOrder::Shuffled(t),
            WorklistOrder::Shuffled(t + 1000),
        ] {
            assert_eq!(data_dependence_with_order(&cfg, &f.statements, order), base);
        }
    }
}
