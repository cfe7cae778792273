use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Design matrix and response, with the sufficient statistics every scoring
/// path reads: `XᵀX`, `XᵀY` and `YᵀY`.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    gram: Matrix,
    xty: Vec<f64>,
    yty: f64,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "X has {} rows but Y has {} entries",
                x.rows(),
                y.len()
            )));
        }
        if !x.all_finite() {
            return Err(Error::NonFinite("X"));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("Y"));
        }
        let gram = x.gram();
        let xty = x.transpose_mul_vec(&y);
        let yty = dot(&y, &y);
        Ok(Self {
            x,
            y,
            gram,
            xty,
            yty,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// `XᵀX`.
    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn xty(&self) -> &[f64] {
        &self.xty
    }

    pub fn yty(&self) -> f64 {
        self.yty
    }

    /// Sample second-moment matrix `S = XᵀX / n`.
    pub fn sample_covariance(&self) -> Matrix {
        let n = self.n().max(1) as f64;
        self.gram.scale(1.0 / n)
    }

    /// Same data with columns reordered: new column `k` is old column `order[k]`.
    pub fn permute_columns(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.p() {
            return Err(Error::DimensionMismatch(
                "permutation length differs from p".into(),
            ));
        }
        let mut seen = alloc::vec![false; self.p()];
        for &o in order {
            if o >= self.p() || core::mem::replace(&mut seen[o], true) {
                return Err(Error::DimensionMismatch(
                    "column order is not a permutation".into(),
                ));
            }
        }
        Self::new(self.x.select_columns(order), self.y.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn caches_match_data() {
        let x = Matrix::from_fn(4, 2, |r, c| (r + 2 * c) as f64);
        let y = alloc::vec![1.0, -1.0, 2.0, 0.5];
        let d = Dataset::new(x.clone(), y.clone()).unwrap();
        assert_eq!(d.gram(), &x.transpose().matmul(&x).unwrap());
        assert_eq!(d.xty(), &x.transpose_mul_vec(&y)[..]);
        assert_eq!(d.yty(), 1.0 + 1.0 + 4.0 + 0.25);
    }

    #[test]
    fn rejects_bad_input() {
        let x = Matrix::zeros(2, 1);
        assert!(Dataset::new(x.clone(), alloc::vec![1.0]).is_err());
        assert_eq!(
            Dataset::new(x, alloc::vec![1.0, f64::NAN]).unwrap_err(),
            Error::NonFinite("Y")
        );
    }
}
