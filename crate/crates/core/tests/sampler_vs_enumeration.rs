use std::collections::HashMap;

use dagselect_core::graphs::Dag;
use dagselect_core::rng::stream;
use dagselect_core::sampler::{run_chain_with, ChainControl};
use dagselect_core::scoring::{enumerate_posterior, gamma_mask, ExactPosterior};
use dagselect_core::simdata::GroundTruth;
use dagselect_core::{CholeskyParam, Dataset, Hyperparameters, VariableIndicator};

fn small_data(n: usize, seed: u64) -> Dataset {
    let param = CholeskyParam::from_entries(vec![1.0, 1.5, 1.0, 2.0], &[(2, 0, 0.8), (3, 1, -0.6)])
        .unwrap();
    let dag = Dag::from_edges(4, &[(0, 2), (1, 3)]).unwrap();
    let truth = GroundTruth {
        scenario: 0,
        setting: 0,
        seed,
        beta0: vec![1.0, 0.0, 0.8, 0.0],
        gamma0: VariableIndicator::from_indices(4, &[0, 2]),
        sigma0: dagselect_core::cholesky::reconstruct_covariance(&param),
        dag0: Some(dag),
        cholesky0: Some(param),
        sigma_eps2: 1.0,
        permutation: None,
    };
    truth.sample(n, &mut stream(seed, 9)).unwrap()
}

#[test]
fn chain_matches_enumeration() {
    let data = small_data(40, 21);
    let hyper = Hyperparameters::default();
    let table = enumerate_posterior(&data, &hyper, 6).unwrap();
    let codec = table.codec();
    let control = ChainControl {
        iters: 200_000,
        burnin: 10_000,
        seed: 5,
        check_every: 10_000,
        ..ChainControl::default()
    };
    let mut counts: HashMap<(u32, u64), u64> = HashMap::new();
    run_chain_with(&data, &hyper, &control, |rec, st| {
        if rec.iteration > control.burnin {
            *counts
                .entry((gamma_mask(&st.gamma()), codec.encode(&st.dag())))
                .or_default() += 1;
        }
    })
    .unwrap();
    let total = (control.iters - control.burnin) as f64;
    let mut tv = 0.0;
    for e in table.entries() {
        let f = counts.get(&(e.gamma, e.dag)).copied().unwrap_or(0) as f64 / total;
        tv += (f - e.probability).abs();
    }
    let tv = tv / 2.0;
    assert!(tv <= 0.05, "total variation {tv}");

    let exact = ExactPosterior::new(&data, &hyper).unwrap();
    assert!((exact.log_normalizer() - table.log_normalizer()).abs() < 1e-9);
}

#[test]
fn workers_do_not_change_the_chain() {
    let data = small_data(30, 4);
    let hyper = Hyperparameters::default();
    let mut runs = Vec::new();
    for workers in [1, 3] {
        let control = ChainControl {
            iters: 3_000,
            burnin: 1_000,
            seed: 17,
            workers,
            ..ChainControl::default()
        };
        runs.push(dagselect_core::sampler::run_chain(&data, &hyper, &control).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn cached_deltas_match_full_scores() {
    use dagselect_core::sampler::{Init, Sampler};
    let data = small_data(25, 8);
    let hyper = Hyperparameters {
        b: 0.7,
        ..Hyperparameters::default()
    };
    let init = Init::Given {
        gamma: VariableIndicator::from_indices(4, &[0, 2, 3]),
        dag: Dag::from_edges(4, &[(0, 2), (1, 3), (2, 3)]).unwrap(),
    };
    let control = ChainControl {
        init,
        ..ChainControl::default()
    };
    let s = Sampler::new(&data, &hyper, &control).unwrap();
    let base = s.fresh_score().unwrap().log_score;
    assert!((s.cached_score().log_score - base).abs() < 1e-9);
    let gamma = s.state().gamma();
    let dag = s.state().dag();
    for j in 0..4 {
        let full = s
            .context()
            .score(&gamma.flipped(j), &dag)
            .unwrap()
            .log_score
            - base;
        assert!((s.delta_gamma_flip(j).unwrap() - full).abs() < 1e-9);
    }
    for i in 0..3 {
        for t in i + 1..4 {
            let full = s
                .context()
                .score(&gamma, &dag.column_flip(i, t).unwrap())
                .unwrap()
                .log_score
                - base;
            assert!((s.delta_column_flip(i, t).unwrap() - full).abs() < 1e-9);
        }
    }
}
