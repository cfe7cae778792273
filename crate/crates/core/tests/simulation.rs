use dagselect_core::rng::stream;
use dagselect_core::simdata::{gen_scenario1, gen_scenario2};

#[test]
fn sample_covariance_converges_to_truth() {
    for truth in [
        gen_scenario1(1, 3).unwrap().truth,
        gen_scenario2(3, 3).unwrap().truth,
    ] {
        let n = 100_000;
        let data = truth.sample(n, &mut stream(99, 1)).unwrap();
        let s = data.sample_covariance();
        for i in 0..30 {
            for j in 0..30 {
                let sd = (truth.sigma0[(i, i)] * truth.sigma0[(j, j)]).sqrt();
                // Standard error of a sample covariance is at most √2·σ_iσ_j/√n.
                let bound = 6.0 * 2f64.sqrt() * sd / (n as f64).sqrt();
                assert!(
                    (s[(i, j)] - truth.sigma0[(i, j)]).abs() < bound,
                    "entry ({i}, {j}): {} vs {}",
                    s[(i, j)],
                    truth.sigma0[(i, j)]
                );
            }
        }
    }
}
