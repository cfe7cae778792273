//! Simulation benchmarks with known truth.
//!
//! Scenarios 1 and 2 are transcription-factor networks: every sixth (or
//! fifth) variable is a regulator and the variables just below it are its
//! children. Scenario 3 has a banded covariance with the columns shuffled, so
//! the variable ordering is wrong for any DAG model.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::cholesky::{reconstruct_covariance, CholeskyParam};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graphs::Dag;
use crate::linalg::{cholesky, symmetric_eigenvalues, Matrix};
use crate::math;
use crate::rng::{stream, StreamRng};
use crate::scoring::check_condition_a;
use crate::spike_slab::VariableIndicator;

pub const N_TRAIN: usize = 100;
pub const N_TEST: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub scenario: u8,
    pub setting: u8,
    pub seed: u64,
    pub beta0: Vec<f64>,
    pub gamma0: VariableIndicator,
    /// Absent when the covariates do not follow a DAG.
    pub dag0: Option<Dag>,
    pub cholesky0: Option<CholeskyParam>,
    /// Covariance of the covariates, in the column order of the data.
    pub sigma0: Matrix,
    pub sigma_eps2: f64,
    /// Column shuffle: data column `k` is latent variable `permutation[k]`.
    pub permutation: Option<Vec<usize>>,
}

impl GroundTruth {
    pub fn p(&self) -> usize {
        self.beta0.len()
    }

    /// Draws `n` rows of `(X, Y)`. DAG truths are sampled ancestrally from
    /// `Lᵀx = e`, `e ~ N(0, D)`; otherwise through a Cholesky factor of `Σ₀`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        let p = self.p();
        let x = match (&self.cholesky0, &self.dag0) {
            (Some(param), Some(dag)) => sample_ancestral(param, dag, n, rng),
            _ => sample_covariance(&self.sigma0, n, rng)?,
        };
        let sd = math::sqrt(self.sigma_eps2);
        let mut y = Vec::with_capacity(n);
        for r in 0..n {
            let row = x.row(r);
            let mean: f64 = (0..p).map(|j| row[j] * self.beta0[j]).sum();
            let e: f64 = rng.sample(StandardNormal);
            y.push(mean + sd * e);
        }
        Dataset::new(x, y)
    }

    /// Whether the true DAG, restricted to edges touching an active variable,
    /// only joins active variables. `None` without a true DAG.
    pub fn condition_a_status(&self) -> Option<bool> {
        let dag = self.dag0.as_ref()?;
        let active: Vec<(usize, usize)> = dag
            .edges()
            .filter(|&(c, q)| self.gamma0.get(c) || self.gamma0.get(q))
            .collect();
        let sub = Dag::from_edges(dag.p(), &active).ok()?;
        check_condition_a(&self.gamma0, &sub.adjacency()).ok()
    }
}

/// Ancestral sampling for `Ω = L D⁻¹ Lᵀ`: `x_j = e_j − Σ_{k ∈ pa(j)} L_kj x_k`,
/// visiting vertices from the last (parents come later in the ordering).
pub fn sample_ancestral<R: Rng + ?Sized>(
    param: &CholeskyParam,
    dag: &Dag,
    n: usize,
    rng: &mut R,
) -> Matrix {
    let p = param.p();
    let sd: Vec<f64> = param.d().iter().map(|&d| math::sqrt(d)).collect();
    let mut x = Matrix::zeros(n, p);
    for r in 0..n {
        let row = x.row_mut(r);
        for j in (0..p).rev() {
            let e: f64 = rng.sample(StandardNormal);
            let mut v = sd[j] * e;
            for &k in dag.parents(j) {
                v -= param.l()[(k, j)] * row[k];
            }
            row[j] = v;
        }
    }
    x
}

/// Rows `x = C z` with `C Cᵀ = Σ`.
pub fn sample_covariance<R: Rng + ?Sized>(sigma: &Matrix, n: usize, rng: &mut R) -> Result<Matrix> {
    let c = cholesky(sigma)?;
    let p = sigma.rows();
    let mut x = Matrix::zeros(n, p);
    let mut z = vec![0.0; p];
    for r in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let row = x.row_mut(r);
        for i in 0..p {
            row[i] = (0..=i).map(|k| c[(i, k)] * z[k]).sum();
        }
    }
    Ok(x)
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub truth: GroundTruth,
    pub train: Dataset,
    pub test: Dataset,
}

/// Any scenario by number.
pub fn generate(scenario: u8, setting: u8, seed: u64) -> Result<Simulation> {
    match scenario {
        1 => gen_scenario1(setting, seed),
        2 => gen_scenario2(setting, seed),
        3 => gen_scenario3(setting, seed),
        _ => Err(Error::InvalidSetting { scenario, setting }),
    }
}

fn finish(truth: GroundTruth, rng: &mut StreamRng) -> Result<Simulation> {
    let train = truth.sample(N_TRAIN, rng)?;
    let test = truth.sample(N_TEST, rng)?;
    Ok(Simulation { truth, train, test })
}

/// Regulator network: a regulator at every `group`-th position (1-based
/// `group, 2·group, …`), each with the `group − 1` preceding variables as
/// children. A child is `w · regulator + noise` with `w` from `weight`, which
/// puts `−w` in `L`.
fn regulator_truth(
    p: usize,
    group: usize,
    d_range: (f64, f64),
    mut weight: impl FnMut(&mut StreamRng) -> f64,
    rng: &mut StreamRng,
) -> Result<(Dag, CholeskyParam)> {
    let d: Vec<f64> = (0..p)
        .map(|_| rng.random_range(d_range.0..d_range.1))
        .collect();
    let mut edges = Vec::new();
    let mut entries = Vec::new();
    for tf in (group - 1..p).step_by(group) {
        for k in 1..group {
            let child = tf - k;
            edges.push((child, tf));
            entries.push((tf, child, -weight(rng)));
        }
    }
    Ok((
        Dag::from_edges(p, &edges)?,
        CholeskyParam::from_entries(d, &entries)?,
    ))
}

fn norm2(beta: &[f64]) -> f64 {
    beta.iter().map(|b| b * b).sum()
}

/// `n = 100`, `p = 240`, 40 regulators with 5 children each, every child
/// being its regulator plus noise. The first four clusters are active with coefficients
/// `(5, −5, 3, −3)` on the regulators and regulator / `√10` (settings 1–2) or
/// regulator / 10 (settings 3–4) on the children; settings 2 and 4 flip the
/// sign for the two children closest to each regulator.
pub fn gen_scenario1(setting: u8, seed: u64) -> Result<Simulation> {
    if !(1..=4).contains(&setting) {
        return Err(Error::InvalidSetting {
            scenario: 1,
            setting,
        });
    }
    let p = 240;
    let mut rng = stream(seed, 0);
    let (dag, param) = regulator_truth(p, 6, (3.0, 5.0), |_| 1.0, &mut rng)?;
    let divisor = if setting <= 2 { math::sqrt(10.0) } else { 10.0 };
    let flip = setting.is_multiple_of(2);
    let mut beta = vec![0.0; p];
    for (c, &b) in [5.0, -5.0, 3.0, -3.0].iter().enumerate() {
        let tf = 6 * c + 5;
        beta[tf] = b;
        for k in 1..=5 {
            let sign = if flip && k <= 2 { -1.0 } else { 1.0 };
            beta[tf - k] = sign * b / divisor;
        }
    }
    let truth = GroundTruth {
        scenario: 1,
        setting,
        seed,
        gamma0: support(&beta),
        sigma_eps2: norm2(&beta) / 4.0,
        beta0: beta,
        sigma0: reconstruct_covariance(&param),
        dag0: Some(dag),
        cholesky0: Some(param),
        permutation: None,
    };
    finish(truth, &mut rng)
}

/// `n = 100`, `p = 150`, 30 regulators with 4 children each and regression
/// weights of child on regulator drawn from `U(0.3, 0.7)`. The first 20 coefficients are drawn from
/// `U(0.5, 1)` (settings 1–2) or `U(0.2, 1)` (settings 3–4), with independent
/// fair random signs in settings 2 and 4.
pub fn gen_scenario2(setting: u8, seed: u64) -> Result<Simulation> {
    if !(1..=4).contains(&setting) {
        return Err(Error::InvalidSetting {
            scenario: 2,
            setting,
        });
    }
    let p = 150;
    let mut rng = stream(seed, 0);
    let (dag, param) = regulator_truth(p, 5, (2.0, 5.0), |r| r.random_range(0.3..0.7), &mut rng)?;
    let low = if setting <= 2 { 0.5 } else { 0.2 };
    let beta = signal(p, 20, low, setting.is_multiple_of(2), &mut rng);
    let truth = GroundTruth {
        scenario: 2,
        setting,
        seed,
        gamma0: support(&beta),
        sigma_eps2: norm2(&beta),
        beta0: beta,
        sigma0: reconstruct_covariance(&param),
        dag0: Some(dag),
        cholesky0: Some(param),
        permutation: None,
    };
    finish(truth, &mut rng)
}

/// Banded covariance shifted to minimum eigenvalue 0.01, columns shuffled.
pub fn banded_covariance(p: usize) -> Result<Matrix> {
    let band = Matrix::from_fn(p, p, |i, j| {
        let gap = i.abs_diff(j);
        if gap <= 5 {
            2.0 * (1.0 - gap as f64 / 10.0).max(0.0)
        } else {
            0.0
        }
    });
    let eig_min = symmetric_eigenvalues(&band)?[0];
    let shift = 0.01 - eig_min;
    Ok(Matrix::from_fn(p, p, |i, j| {
        band[(i, j)] + if i == j { shift } else { 0.0 }
    }))
}

/// `n = 100`, `p = 150`, banded covariance, shuffled columns. The first 10
/// coefficients (after shuffling) are drawn from `U(0.5, 1)`; setting 2 gives
/// them fair random signs.
pub fn gen_scenario3(setting: u8, seed: u64) -> Result<Simulation> {
    if !(1..=2).contains(&setting) {
        return Err(Error::InvalidSetting {
            scenario: 3,
            setting,
        });
    }
    let p = 150;
    let mut rng = stream(seed, 0);
    let latent = banded_covariance(p)?;
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(&mut rng);
    let sigma0 = Matrix::from_fn(p, p, |a, b| latent[(perm[a], perm[b])]);
    let beta = signal(p, 10, 0.5, setting == 2, &mut rng);
    let truth = GroundTruth {
        scenario: 3,
        setting,
        seed,
        gamma0: support(&beta),
        sigma_eps2: norm2(&beta) / 4.0,
        beta0: beta,
        sigma0,
        dag0: None,
        cholesky0: None,
        permutation: Some(perm),
    };
    finish(truth, &mut rng)
}

fn signal(p: usize, active: usize, low: f64, random_signs: bool, rng: &mut StreamRng) -> Vec<f64> {
    let mut beta = vec![0.0; p];
    for b in beta.iter_mut().take(active) {
        *b = rng.random_range(low..1.0);
    }
    if random_signs {
        for b in beta.iter_mut().take(active) {
            if rng.random::<bool>() {
                *b = -*b;
            }
        }
    }
    beta
}

fn support(beta: &[f64]) -> VariableIndicator {
    VariableIndicator::from_bits(beta.iter().map(|&b| b != 0.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cholesky::reconstruct_precision;
    use crate::linalg::inverse_spd;

    #[test]
    fn scenario1_setting1_truth() {
        let sim = gen_scenario1(1, 7).unwrap();
        let t = &sim.truth;
        assert_eq!(t.gamma0.size(), 24);
        assert_eq!(t.gamma0.indices(), (0..24).collect::<Vec<_>>());
        assert!((t.sigma_eps2 - 25.5).abs() < 1e-12);
        let dag = t.dag0.as_ref().unwrap();
        assert_eq!(dag.edge_count(), 200);
        assert_eq!(dag.parents(0), &[5]);
        assert_eq!(dag.parents(234), &[239]);
        assert!(dag.parents(239).is_empty());
        let param = t.cholesky0.as_ref().unwrap();
        assert!(param.d().iter().all(|&v| (3.0..=5.0).contains(&v)));
        assert_eq!(param.l()[(5, 0)], -1.0);
        // Child given regulator has mean equal to the regulator.
        assert!((t.sigma0[(0, 5)] - t.sigma0[(5, 5)]).abs() < 1e-12);
        assert_eq!(
            (sim.train.n(), sim.train.p(), sim.test.n()),
            (100, 240, 100)
        );
        assert_eq!(t.condition_a_status(), Some(true));
    }

    #[test]
    fn scenario1_signs() {
        let t = gen_scenario1(2, 1).unwrap().truth;
        let c = 5.0 / math::sqrt(10.0);
        assert_eq!(&t.beta0[..6], &[c, c, c, -c, -c, 5.0]);
        let t = gen_scenario1(3, 1).unwrap().truth;
        assert_eq!(&t.beta0[..6], &[0.5, 0.5, 0.5, 0.5, 0.5, 5.0]);
        assert_eq!(t.condition_a_status(), Some(true));
    }

    #[test]
    fn scenario2_truth() {
        let sim = gen_scenario2(1, 3).unwrap();
        let t = &sim.truth;
        assert_eq!(t.gamma0.size(), 20);
        assert!(t.beta0[..20].iter().all(|b| (0.5..=1.0).contains(b)));
        assert!((t.sigma_eps2 - norm2(&t.beta0)).abs() < 1e-12);
        let param = t.cholesky0.as_ref().unwrap();
        let omega = reconstruct_precision(param);
        let inv = inverse_spd(&t.sigma0).unwrap();
        assert!(omega.max_abs_diff(&inv) < 1e-8);
        assert_eq!(t.dag0.as_ref().unwrap().edge_count(), 120);
        let signed = gen_scenario2(2, 3).unwrap().truth;
        assert!(signed.beta0[..20]
            .iter()
            .all(|b| (0.5..=1.0).contains(&b.abs())));
    }

    #[test]
    fn scenario3_truth() {
        let sim = gen_scenario3(1, 5).unwrap();
        let t = &sim.truth;
        assert_eq!(t.gamma0.size(), 10);
        assert!(t.dag0.is_none());
        assert_eq!(t.condition_a_status(), None);
        let eig = symmetric_eigenvalues(&t.sigma0).unwrap();
        assert!((eig[0] - 0.01).abs() < 1e-9);
        let perm = t.permutation.as_ref().unwrap();
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..150).collect::<Vec<_>>());
    }

    #[test]
    fn band_is_limited() {
        let s = banded_covariance(20).unwrap();
        assert_eq!(s[(0, 6)], 0.0);
        assert!(s[(0, 5)] > 0.0);
        assert!((s[(0, 1)] - 1.8).abs() < 1e-15);
    }

    #[test]
    fn settings_are_checked() {
        assert!(matches!(
            gen_scenario1(5, 0),
            Err(Error::InvalidSetting { .. })
        ));
        assert!(matches!(
            gen_scenario3(3, 0),
            Err(Error::InvalidSetting { .. })
        ));
        assert!(matches!(
            generate(4, 1, 0),
            Err(Error::InvalidSetting { .. })
        ));
    }

    #[test]
    fn seed_determines_everything() {
        let a = gen_scenario2(4, 11).unwrap();
        let b = gen_scenario2(4, 11).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.train.x(), b.train.x());
        assert_eq!(a.test.y(), b.test.y());
        let c = gen_scenario2(4, 12).unwrap();
        assert_ne!(a.train.y(), c.train.y());
    }
}
