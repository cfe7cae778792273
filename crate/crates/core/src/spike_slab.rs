//! Variable indicators, the Markov random field prior tying them to the DAG,
//! and the marginal likelihood of `Y` once the slab coefficients (and, in the
//! unknown-variance model, `σ²`) are integrated out.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graphs::Adjacency;
use crate::linalg::{cholesky, solve_lower, Matrix};
use crate::math;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VariableIndicator {
    bits: Vec<bool>,
}

impl VariableIndicator {
    pub fn empty(p: usize) -> Self {
        Self {
            bits: alloc::vec![false; p],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn from_indices(p: usize, idx: &[usize]) -> Self {
        let mut bits = alloc::vec![false; p];
        for &j in idx {
            bits[j] = true;
        }
        Self { bits }
    }

    /// Parses a string of `0`/`1` characters.
    pub fn parse_bitstring(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::DimensionMismatch(alloc::format!(
                    "invalid indicator character {c:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_bits)
    }

    pub fn to_bitstring(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.bits.len()
    }

    /// `|γ|`.
    pub fn size(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        self.bits[j]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&j| self.bits[j]).collect()
    }

    pub fn flipped(&self, j: usize) -> Self {
        let mut out = self.clone();
        out.bits[j] = !out.bits[j];
        out
    }
}

/// How `σ²` enters the marginal likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Known {
        sigma2: f64,
    },
    /// `σ² ~ IG(a0, b0)`, integrated out.
    InverseGamma {
        a0: f64,
        b0: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    /// Slab variance multiplier `τ²`.
    pub tau2: f64,
    pub noise: NoiseModel,
    /// MRF sparsity penalty.
    pub a: f64,
    /// MRF smoothness; `0` decouples `γ` from the DAG.
    pub b: f64,
    /// Edge probability.
    pub q: f64,
    /// Complexity bound: `|γ| < r` and every `ν_j < r`. `usize::MAX` means unbounded.
    pub r: usize,
    /// DAG-Wishart scale; `None` is the identity.
    pub u: Option<Matrix>,
    /// Shape offset `k` in `α_i = ν_i + k`.
    pub alpha_offset: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            tau2: 1.0,
            noise: NoiseModel::InverseGamma { a0: 0.1, b0: 0.01 },
            a: 2.75,
            b: 0.5,
            q: 0.005,
            r: usize::MAX,
            u: None,
            alpha_offset: 10.0,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: &str) -> Error {
            Error::InvalidHyperparameter {
                name,
                reason: reason.into(),
            }
        }
        if !(self.tau2 > 0.0 && self.tau2.is_finite()) {
            return Err(bad("tau2", "must be positive and finite"));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(bad("a", "must be positive and finite"));
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(bad("b", "must be non-negative and finite"));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(bad("q", "must lie strictly between 0 and 1"));
        }
        if !(self.alpha_offset > 2.0 && self.alpha_offset.is_finite()) {
            return Err(bad(
                "alpha_offset",
                "must exceed 2 for a proper DAG-Wishart prior",
            ));
        }
        match self.noise {
            NoiseModel::Known { sigma2 } if !(sigma2 > 0.0 && sigma2.is_finite()) => {
                return Err(bad("sigma2", "must be positive and finite"))
            }
            NoiseModel::InverseGamma { a0, .. } if !(a0 > 0.0 && a0.is_finite()) => {
                return Err(bad("a0", "must be positive and finite"))
            }
            NoiseModel::InverseGamma { b0, .. } if !(b0 > 0.0 && b0.is_finite()) => {
                return Err(bad("b0", "must be positive and finite"))
            }
            _ => {}
        }
        if let Some(u) = &self.u {
            if !u.is_square() || !u.all_finite() {
                return Err(bad("U", "must be a finite square matrix"));
            }
        }
        Ok(())
    }

    /// Scale matrix for `p` covariates.
    pub fn scale_matrix(&self, p: usize) -> Result<Matrix> {
        match &self.u {
            None => Ok(Matrix::identity(p)),
            Some(u) if u.rows() == p => Ok(u.clone()),
            Some(u) => Err(Error::DimensionMismatch(alloc::format!(
                "U is {}x{} but p = {p}",
                u.rows(),
                u.cols()
            ))),
        }
    }
}

/// `−a·|γ| + b·γᵀGγ`, or `-inf` when `|γ| ≥ r`.
pub fn log_mrf_prior(gamma: &VariableIndicator, g: &Adjacency, hyper: &Hyperparameters) -> f64 {
    mrf_from_counts(gamma.size(), g.quadratic_form(gamma.bits()), hyper)
}

/// MRF prior from `|γ|` and `γᵀGγ` (twice the number of edges among included vertices).
#[inline]
pub(crate) fn mrf_from_counts(size: usize, quad: usize, hyper: &Hyperparameters) -> f64 {
    if size >= hyper.r {
        return f64::NEG_INFINITY;
    }
    -hyper.a * size as f64 + hyper.b * quad as f64
}

/// Columns of `x` where `gamma` is set, in order.
pub fn submatrix(x: &Matrix, gamma: &VariableIndicator) -> Result<Matrix> {
    if x.cols() != gamma.p() {
        return Err(Error::DimensionMismatch("X and gamma differ in p".into()));
    }
    Ok(x.select_columns(&gamma.indices()))
}

/// Log marginal likelihood of `y` given the selected design `xg`, up to an
/// additive constant that does not depend on the model.
pub fn log_marginal_likelihood(y: &[f64], xg: &Matrix, hyper: &Hyperparameters) -> Result<f64> {
    if xg.rows() != y.len() {
        return Err(Error::DimensionMismatch("Y and X_gamma differ in n".into()));
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("Y"));
    }
    if !xg.all_finite() {
        return Err(Error::NonFinite("X_gamma"));
    }
    let yty = crate::linalg::dot(y, y);
    marginal_from_gram(&xg.gram(), &xg.transpose_mul_vec(y), yty, y.len(), hyper)
}

/// Same quantity from the cached statistics of `data` for the selected columns.
pub fn log_marginal_for(
    data: &Dataset,
    selected: &[usize],
    hyper: &Hyperparameters,
) -> Result<f64> {
    let gram = data.gram().principal(selected);
    let xty: Vec<f64> = selected.iter().map(|&j| data.xty()[j]).collect();
    marginal_from_gram(&gram, &xty, data.yty(), data.n(), hyper)
}

/// Woodbury/Sylvester evaluation in the `|γ|`-dimensional space:
/// `det(I_n + τ²XXᵀ) = det(I + τ²XᵀX)` and
/// `Yᵀ(I_n + τ²XXᵀ)⁻¹Y = YᵀY − τ²·YᵀX (I + τ²XᵀX)⁻¹ XᵀY`.
pub(crate) fn marginal_from_gram(
    gram: &Matrix,
    xty: &[f64],
    yty: f64,
    n: usize,
    hyper: &Hyperparameters,
) -> Result<f64> {
    let k = gram.rows();
    let mut m = gram.scale(hyper.tau2);
    for i in 0..k {
        m[(i, i)] += 1.0;
    }
    let c = cholesky(&m)?;
    let log_det: f64 = 2.0 * (0..k).map(|i| math::ln(c[(i, i)])).sum::<f64>();
    let w = solve_lower(&c, xty);
    let quad = (yty - hyper.tau2 * crate::linalg::dot(&w, &w)).max(0.0);
    Ok(match hyper.noise {
        NoiseModel::Known { sigma2 } => -0.5 * log_det - quad / (2.0 * sigma2),
        NoiseModel::InverseGamma { a0, b0 } => {
            -0.5 * log_det - (n as f64 + 2.0 * a0) / 2.0 * math::ln(b0 + 0.5 * quad)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::Dag;
    use alloc::vec;

    fn known(sigma2: f64) -> Hyperparameters {
        Hyperparameters {
            noise: NoiseModel::Known { sigma2 },
            ..Hyperparameters::default()
        }
    }

    #[test]
    fn mrf_examples() {
        let h = Hyperparameters::default();
        let g = Dag::from_parents(vec![vec![1], vec![], vec![]])
            .unwrap()
            .adjacency();
        assert_eq!(log_mrf_prior(&VariableIndicator::empty(3), &g, &h), 0.0);
        let gamma = VariableIndicator::from_indices(3, &[0, 1]);
        assert!((log_mrf_prior(&gamma, &g, &h) + 4.5).abs() < 1e-15);
        let bounded = Hyperparameters { r: 2, ..h };
        assert_eq!(log_mrf_prior(&gamma, &g, &bounded), f64::NEG_INFINITY);
    }

    #[test]
    fn submatrix_examples() {
        let x = Matrix::from_fn(2, 3, |r, c| (10 * r + c) as f64);
        let all = VariableIndicator::from_bits(vec![true; 3]);
        assert_eq!(submatrix(&x, &all).unwrap(), x);
        assert_eq!(
            submatrix(&x, &VariableIndicator::empty(3)).unwrap().cols(),
            0
        );
        let second = submatrix(&x, &VariableIndicator::from_indices(3, &[1])).unwrap();
        assert_eq!(second.column(0), vec![1.0, 11.0]);
    }

    #[test]
    fn empty_model_marginal() {
        let y = [1.0, -2.0, 0.5];
        let v = log_marginal_likelihood(&y, &Matrix::zeros(3, 0), &known(1.0)).unwrap();
        assert!((v + 0.5 * 5.25).abs() < 1e-15);
    }

    #[test]
    fn slab_collapse_limit() {
        let y = [1.0, -2.0, 0.5, 0.3];
        let x = Matrix::from_fn(4, 2, |r, c| ((r * 7 + c * 3) % 5) as f64 - 2.0);
        let h = Hyperparameters {
            tau2: 1e-12,
            ..known(2.0)
        };
        let v = log_marginal_likelihood(&y, &x, &h).unwrap();
        let yty: f64 = y.iter().map(|v| v * v).sum();
        assert!((v + yty / 4.0).abs() < 1e-9);
    }

    #[test]
    fn bitstring_round_trip() {
        let g = VariableIndicator::parse_bitstring("0110").unwrap();
        assert_eq!(g.indices(), vec![1, 2]);
        assert_eq!(g.to_bitstring(), "0110");
        assert!(VariableIndicator::parse_bitstring("01x").is_err());
    }

    #[test]
    fn validation() {
        assert!(Hyperparameters::default().validate().is_ok());
        let bad_q = Hyperparameters {
            q: 1.5,
            ..Hyperparameters::default()
        };
        assert!(matches!(
            bad_q.validate(),
            Err(Error::InvalidHyperparameter { name: "q", .. })
        ));
        let bad_k = Hyperparameters {
            alpha_offset: 2.0,
            ..Hyperparameters::default()
        };
        assert!(bad_k.validate().is_err());
    }
}
