//! Modified Cholesky decomposition `Ω = L D⁻¹ Lᵀ`.
//!
//! `L` is unit lower-triangular and `D` positive diagonal. `L[(i, j)] != 0`
//! for `i > j` means `i` is a parent of `j`, which is how the DAG shows up in
//! the precision matrix.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graphs::Dag;
use crate::linalg::Matrix;

pub const DEFAULT_SPARSITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyParam {
    l: Matrix,
    d: Vec<f64>,
}

impl CholeskyParam {
    /// Validates that `l` is unit lower-triangular and `d` strictly positive.
    pub fn new(l: Matrix, d: Vec<f64>) -> Result<Self> {
        let p = d.len();
        if l.rows() != p || l.cols() != p {
            return Err(Error::DimensionMismatch("L and D sizes differ".into()));
        }
        for i in 0..p {
            if l[(i, i)] != 1.0 {
                return Err(Error::InvalidDag("L must have a unit diagonal".into()));
            }
            if (i + 1..p).any(|j| l[(i, j)] != 0.0) {
                return Err(Error::InvalidDag("L must be lower triangular".into()));
            }
            if !(d[i] > 0.0) || !d[i].is_finite() {
                return Err(Error::NotPositiveDefinite {
                    index: i,
                    pivot: d[i],
                });
            }
        }
        Ok(Self { l, d })
    }

    /// `L` with the given strictly-lower entries (row, column) and diagonal `d`.
    pub fn from_entries(d: Vec<f64>, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut l = Matrix::identity(d.len());
        for &(i, j, v) in entries {
            if i <= j || i >= d.len() {
                return Err(Error::InvalidDag(
                    "L entries must lie strictly below the diagonal".into(),
                ));
            }
            l[(i, j)] = v;
        }
        Self::new(l, d)
    }

    pub fn p(&self) -> usize {
        self.d.len()
    }

    pub fn l(&self) -> &Matrix {
        &self.l
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    /// Whether the nonzero pattern of `L` fits inside `dag`.
    pub fn in_space_of(&self, dag: &Dag) -> bool {
        let p = self.p();
        dag.p() == p
            && (0..p).all(|j| (j + 1..p).all(|i| self.l[(i, j)] == 0.0 || dag.has_edge(j, i)))
    }
}

/// Factorizes a symmetric positive definite precision matrix.
pub fn modified_cholesky(omega: &Matrix) -> Result<CholeskyParam> {
    if !omega.is_square() {
        return Err(Error::DimensionMismatch(
            "precision matrix must be square".into(),
        ));
    }
    // Standard LDLᵀ: Ω = L Δ Lᵀ with Δ = D⁻¹.
    let p = omega.rows();
    let mut l = Matrix::identity(p);
    let mut delta = Vec::with_capacity(p);
    for j in 0..p {
        let mut dj = omega[(j, j)];
        for k in 0..j {
            dj -= l[(j, k)] * l[(j, k)] * delta[k];
        }
        if !(dj > 0.0) || !dj.is_finite() {
            return Err(Error::NotPositiveDefinite {
                index: j,
                pivot: dj,
            });
        }
        delta.push(dj);
        for i in j + 1..p {
            let mut s = omega[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)] * delta[k];
            }
            l[(i, j)] = s / dj;
        }
    }
    let d = delta.into_iter().map(|x| 1.0 / x).collect();
    Ok(CholeskyParam { l, d })
}

/// `L · diag(D)⁻¹ · Lᵀ`.
pub fn reconstruct_precision(param: &CholeskyParam) -> Matrix {
    let p = param.p();
    let l = &param.l;
    Matrix::from_fn(p, p, |r, c| {
        (0..=r.min(c))
            .map(|k| l[(r, k)] * l[(c, k)] / param.d[k])
            .sum()
    })
}

/// `Σ = Ω⁻¹ = L⁻ᵀ D L⁻¹`.
pub fn reconstruct_covariance(param: &CholeskyParam) -> Matrix {
    let p = param.p();
    // Columns of L⁻¹ by forward substitution on the unit-diagonal factor.
    let mut linv = Matrix::identity(p);
    for c in 0..p {
        for r in c + 1..p {
            let s: f64 = (c..r).map(|k| param.l[(r, k)] * linv[(k, c)]).sum();
            linv[(r, c)] = -s;
        }
    }
    Matrix::from_fn(p, p, |r, c| {
        (r.max(c)..p)
            .map(|k| linv[(k, r)] * param.d[k] * linv[(k, c)])
            .sum()
    })
}

/// DAG whose edges are the entries of `L` with magnitude above `tol`.
pub fn sparsity_dag(param: &CholeskyParam, tol: f64) -> Dag {
    let p = param.p();
    let parents = (0..p)
        .map(|j| {
            (j + 1..p)
                .filter(|&i| param.l[(i, j)].abs() > tol)
                .collect()
        })
        .collect();
    Dag::from_parents(parents).expect("parents above the diagonal respect the ordering")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn identity_decomposes_trivially() {
        let c = modified_cholesky(&Matrix::identity(3)).unwrap();
        assert_eq!(c.l(), &Matrix::identity(3));
        assert_eq!(c.d(), &[1.0, 1.0, 1.0]);
        assert_eq!(sparsity_dag(&c, DEFAULT_SPARSITY_TOL), Dag::empty(3));
    }

    #[test]
    fn two_by_two_hand_solution() {
        let omega = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let c = modified_cholesky(&omega).unwrap();
        assert!((c.l()[(1, 0)] - 0.5).abs() < 1e-15);
        assert!((c.d()[0] - 0.5).abs() < 1e-15 && (c.d()[1] - 2.0).abs() < 1e-15);
        assert!(reconstruct_precision(&c).max_abs_diff(&omega) < 1e-15);
        assert_eq!(sparsity_dag(&c, 0.0).parents(0), &[1]);
    }

    #[test]
    fn scaling_d_scales_inverse() {
        let c = CholeskyParam::from_entries(vec![0.5, 2.0], &[(1, 0, 0.5)]).unwrap();
        let scaled = CholeskyParam::from_entries(vec![1.5, 6.0], &[(1, 0, 0.5)]).unwrap();
        let a = reconstruct_precision(&c).scale(1.0 / 3.0);
        assert!(reconstruct_precision(&scaled).max_abs_diff(&a) < 1e-15);
    }

    #[test]
    fn tiny_entries_fall_below_threshold() {
        let c = CholeskyParam::from_entries(vec![1.0, 1.0], &[(1, 0, 1e-12)]).unwrap();
        assert_eq!(sparsity_dag(&c, 1e-8), Dag::empty(2));
    }

    #[test]
    fn not_positive_definite() {
        let omega = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            modified_cholesky(&omega),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn covariance_inverts_precision() {
        let c = CholeskyParam::from_entries(
            vec![2.0, 0.7, 1.3],
            &[(1, 0, 0.4), (2, 0, -1.1), (2, 1, 0.3)],
        )
        .unwrap();
        let prod = reconstruct_precision(&c)
            .matmul(&reconstruct_covariance(&c))
            .unwrap();
        assert!(prod.max_abs_diff(&Matrix::identity(3)) < 1e-13);
    }
}
