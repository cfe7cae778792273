//! Multiple-shape-parameter DAG-Wishart distribution on the Cholesky space of
//! a DAG: log density, log normalizing constant and conjugate update.
//!
//! Everything is in log space. With `n + α_i` shapes the Gamma factors
//! overflow long before any realistic sample size.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::cholesky::CholeskyParam;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graphs::Dag;
use crate::linalg::{log_det_spd, Matrix};
use crate::math::{self, LN_2, LN_PI};

/// Scale matrix `U` and one shape parameter per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct DagWishartParams {
    u: Matrix,
    alpha: Vec<f64>,
}

impl DagWishartParams {
    pub fn new(u: Matrix, alpha: Vec<f64>) -> Result<Self> {
        if !u.is_square() || u.rows() != alpha.len() {
            return Err(Error::DimensionMismatch("U and alpha sizes differ".into()));
        }
        if !u.is_symmetric(1e-12 * (1.0 + u.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs()))))
        {
            return Err(Error::InvalidHyperparameter {
                name: "U",
                reason: "scale matrix must be symmetric".into(),
            });
        }
        Ok(Self { u, alpha })
    }

    /// Shapes `α_i = ν_i(dag) + offset`.
    pub fn with_offset(u: Matrix, dag: &Dag, offset: f64) -> Result<Self> {
        let alpha = (0..dag.p()).map(|i| dag.nu(i) as f64 + offset).collect();
        Self::new(u, alpha)
    }

    pub fn u(&self) -> &Matrix {
        &self.u
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn p(&self) -> usize {
        self.alpha.len()
    }

    /// Checks `α_i − ν_i > 2` for every vertex.
    pub fn check_proper(&self, dag: &Dag) -> Result<()> {
        for i in 0..dag.p() {
            let gap = self.alpha[i] - dag.nu(i) as f64;
            if !(gap > 2.0) {
                return Err(Error::ImproperPrior { vertex: i, gap });
            }
        }
        Ok(())
    }
}

/// Log of the `i`-th factor of the normalizing constant, computed straight
/// from a scale matrix, a parent list and a shape.
pub fn column_log_z(u: &Matrix, i: usize, parents: &[usize], alpha: f64) -> Result<f64> {
    let nu = parents.len() as f64;
    let gap = alpha - nu;
    if !(gap > 2.0) {
        return Err(Error::ImproperPrior { vertex: i, gap });
    }
    let mut with_self = Vec::with_capacity(parents.len() + 1);
    with_self.push(i);
    with_self.extend_from_slice(parents);
    let log_det_parents = log_det_spd(&u.principal(parents))?;
    let log_det_family = log_det_spd(&u.principal(&with_self))?;
    Ok(math::ln_gamma(gap / 2.0 - 1.0)
        + (alpha / 2.0 - 1.0) * LN_2
        + (nu / 2.0) * LN_PI
        + (gap / 2.0 - 1.5) * log_det_parents
        - (gap / 2.0 - 1.0) * log_det_family)
}

pub fn log_z_column(dag: &Dag, params: &DagWishartParams, i: usize) -> Result<f64> {
    if dag.p() != params.p() {
        return Err(Error::DimensionMismatch(
            "DAG and DAG-Wishart parameters differ in p".into(),
        ));
    }
    column_log_z(&params.u, i, dag.parents(i), params.alpha[i])
}

/// `log z_D(U, α)`, the sum of the per-column factors.
pub fn log_z(dag: &Dag, params: &DagWishartParams) -> Result<f64> {
    (0..dag.p()).map(|i| log_z_column(dag, params, i)).sum()
}

/// Log density at `(D, L)`; `-inf` outside the Cholesky space of `dag`.
pub fn log_density(param: &CholeskyParam, dag: &Dag, params: &DagWishartParams) -> Result<f64> {
    if param.p() != params.p() || dag.p() != params.p() {
        return Err(Error::DimensionMismatch(
            "Cholesky parameter and DAG differ in p".into(),
        ));
    }
    let lz = log_z(dag, params)?;
    if !param.in_space_of(dag) {
        return Ok(f64::NEG_INFINITY);
    }
    let p = param.p();
    let l = param.l();
    let u = &params.u;
    // tr(L D⁻¹ Lᵀ U) = Σ_k (L_{·k}ᵀ U L_{·k}) / D_k, using the column sparsity.
    let mut trace = 0.0;
    let mut support = Vec::new();
    for k in 0..p {
        support.clear();
        support.push(k);
        support.extend(dag.parents(k).iter().copied());
        let mut quad = 0.0;
        for &a in &support {
            for &b in &support {
                quad += l[(a, k)] * u[(a, b)] * l[(b, k)];
            }
        }
        trace += quad / param.d()[k];
    }
    let log_d: f64 = (0..p)
        .map(|k| params.alpha[k] / 2.0 * math::ln(param.d()[k]))
        .sum();
    Ok(-0.5 * trace - log_d - lz)
}

/// Conjugate update: `(U + XᵀX, n + α)`.
pub fn posterior_params(
    params: &DagWishartParams,
    data: &Dataset,
    dag: &Dag,
) -> Result<DagWishartParams> {
    if data.p() != params.p() || dag.p() != params.p() {
        return Err(Error::DimensionMismatch(
            "data, DAG and prior differ in p".into(),
        ));
    }
    let n = data.n() as f64;
    Ok(DagWishartParams {
        u: params.u.add(data.gram())?,
        alpha: params.alpha.iter().map(|a| a + n).collect(),
    })
}

/// Per-column memo of a column score keyed by the parent set, with a bounded
/// number of entries (cleared wholesale when full).
#[derive(Debug, Clone)]
pub struct ColumnMemo {
    entries: BTreeMap<Vec<usize>, f64>,
    capacity: usize,
}

impl ColumnMemo {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: BTreeMap::new(),
            capacity,
        }
    }

    pub fn get_or_try_insert(
        &mut self,
        parents: &[usize],
        f: impl FnOnce() -> Result<f64>,
    ) -> Result<f64> {
        if let Some(&v) = self.entries.get(parents) {
            return Ok(v);
        }
        let v = f()?;
        if self.entries.len() >= self.capacity {
            self.entries.clear();
        }
        self.entries.insert(parents.to_vec(), v);
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_vertex() {
        let params = DagWishartParams::new(Matrix::identity(1), vec![3.0]).unwrap();
        let v = log_z_column(&Dag::empty(1), &params, 0).unwrap();
        assert!((v - 0.918_938_5).abs() < 1e-7);
        assert!((v - 0.5 * math::ln(2.0 * math::PI)).abs() < 1e-14);
    }

    #[test]
    fn one_edge_columns() {
        let dag = Dag::from_parents(vec![vec![1], vec![]]).unwrap();
        let params = DagWishartParams::new(Matrix::identity(2), vec![4.0, 3.0]).unwrap();
        let first = log_z_column(&dag, &params, 0).unwrap();
        assert!((first - math::ln(2.0 * math::PI)).abs() < 1e-14);
        let total = log_z(&dag, &params).unwrap();
        assert!((total - 2.756_815_6).abs() < 1e-7);
    }

    #[test]
    fn empty_dag_two_vertices() {
        let params = DagWishartParams::new(Matrix::identity(2), vec![3.0, 3.0]).unwrap();
        let v = log_z(&Dag::empty(2), &params).unwrap();
        assert!((v - 1.837_877_1).abs() < 1e-7);
    }

    #[test]
    fn diagonal_scale_without_parents() {
        let u = Matrix::diagonal(&[2.5, 0.4, 7.0]);
        let alpha = vec![12.0, 5.5, 3.2];
        let params = DagWishartParams::new(u, alpha.clone()).unwrap();
        let dag = Dag::empty(3);
        for (i, &a) in alpha.iter().enumerate() {
            let uii = params.u()[(i, i)];
            let want = math::ln_gamma(a / 2.0 - 1.0) + (a / 2.0 - 1.0) * LN_2
                - (a / 2.0 - 1.0) * math::ln(uii);
            assert!((log_z_column(&dag, &params, i).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn improper_prior_is_rejected() {
        let dag = Dag::from_parents(vec![vec![1], vec![]]).unwrap();
        let params = DagWishartParams::new(Matrix::identity(2), vec![3.0, 3.0]).unwrap();
        assert!(matches!(
            log_z(&dag, &params),
            Err(Error::ImproperPrior { vertex: 0, .. })
        ));
        assert!(params.check_proper(&dag).is_err());
    }

    #[test]
    fn density_examples() {
        let params = DagWishartParams::new(Matrix::identity(1), vec![3.0]).unwrap();
        let point = CholeskyParam::new(Matrix::identity(1), vec![1.0]).unwrap();
        let v = log_density(&point, &Dag::empty(1), &params).unwrap();
        assert!((v + 1.418_938_5).abs() < 1e-7);

        let params = DagWishartParams::new(Matrix::identity(2), vec![3.0, 3.0]).unwrap();
        let off = CholeskyParam::from_entries(vec![1.0, 1.0], &[(1, 0, 0.3)]).unwrap();
        assert_eq!(
            log_density(&off, &Dag::empty(2), &params).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn posterior_update_trivial_cases() {
        let params = DagWishartParams::new(Matrix::identity(2), vec![4.0, 3.0]).unwrap();
        let dag = Dag::empty(2);
        let zero = Dataset::new(Matrix::zeros(5, 2), vec![0.0; 5]).unwrap();
        let post = posterior_params(&params, &zero, &dag).unwrap();
        assert_eq!(post.u(), params.u());
        assert_eq!(post.alpha(), &[9.0, 8.0]);
        let none = Dataset::new(Matrix::zeros(0, 2), vec![]).unwrap();
        assert_eq!(posterior_params(&params, &none, &dag).unwrap(), params);
    }

    #[test]
    fn memo_is_bounded() {
        let mut memo = ColumnMemo::new(2);
        for k in 0..5usize {
            let v = memo.get_or_try_insert(&[k], || Ok(k as f64)).unwrap();
            assert_eq!(v, k as f64);
        }
        assert!(memo.len() <= 2);
    }
}
