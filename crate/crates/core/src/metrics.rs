//! Selection and prediction metrics.

use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{solve_spd, Matrix};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn new(truth: &[bool], selected: &[bool]) -> Result<Self> {
        if truth.len() != selected.len() {
            return Err(Error::DimensionMismatch(
                "truth and selection lengths differ".into(),
            ));
        }
        let mut c = Self::default();
        for (&t, &s) in truth.iter().zip(selected) {
            match (t, s) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    /// `TP / (TP + FN)`, undefined without positives.
    pub fn sensitivity(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// `TN / (TN + FP)`, undefined without negatives.
    pub fn specificity(&self) -> Option<f64> {
        let d = self.tn + self.fp;
        (d > 0).then(|| self.tn as f64 / d as f64)
    }

    /// Matthews correlation; 0 when any margin is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, fp, tn, fn_) = (
            self.tp as f64,
            self.fp as f64,
            self.tn as f64,
            self.fn_ as f64,
        );
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if denom == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / math::sqrt(denom)
        }
    }

    pub fn errors(&self) -> usize {
        self.fp + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionMetrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub mcc: f64,
    pub n_error: usize,
}

pub fn selection_metrics(truth: &[bool], selected: &[bool]) -> Result<SelectionMetrics> {
    let c = Confusion::new(truth, selected)?;
    Ok(SelectionMetrics {
        sensitivity: c.sensitivity(),
        specificity: c.specificity(),
        mcc: c.mcc(),
        n_error: c.errors(),
    })
}

/// Area under the ROC curve by the trapezoidal rule, sweeping the threshold
/// over the distinct scores (tied scores move together, giving a diagonal step).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(
            "scores and labels lengths differ".into(),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut k = 0;
    while k < order.len() {
        let (tp0, fp0) = (tp, fp);
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
    }
    Ok(area / (pos as f64 * neg as f64))
}

/// Least-squares coefficients on the selected columns.
pub fn ls_refit(data: &Dataset, selected: &[usize]) -> Result<Vec<f64>> {
    if selected.is_empty() {
        return Ok(Vec::new());
    }
    if selected.len() > data.n() {
        return Err(Error::RankDeficient);
    }
    let g = data.gram().principal(selected);
    let rhs: Vec<f64> = selected.iter().map(|&j| data.xty()[j]).collect();
    solve_spd(&g, &rhs).map_err(|_| Error::RankDeficient)
}

/// Mean squared prediction error of `β` on the selected columns of `x`.
pub fn mspe(x: &Matrix, y: &[f64], selected: &[usize], beta: &[f64]) -> Result<f64> {
    if x.rows() != y.len() || selected.len() != beta.len() {
        return Err(Error::DimensionMismatch(
            "test data and coefficients do not line up".into(),
        ));
    }
    if y.is_empty() {
        return Err(Error::DimensionMismatch("empty test set".into()));
    }
    let mut sse = 0.0;
    for (r, &yr) in y.iter().enumerate() {
        let row = x.row(r);
        let fit: f64 = selected.iter().zip(beta).map(|(&j, b)| row[j] * b).sum();
        sse += (yr - fit) * (yr - fit);
    }
    Ok(sse / y.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn mann_whitney(scores: &[f64], labels: &[bool]) -> f64 {
        let mut sum = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1.0;
                    sum += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        sum / pairs
    }

    #[test]
    fn example_metrics() {
        let truth = [true, true, false, false];
        let sel = [true, false, true, false];
        let m = selection_metrics(&truth, &sel).unwrap();
        assert_eq!(m.sensitivity, Some(0.5));
        assert_eq!(m.specificity, Some(0.5));
        assert_eq!(m.mcc, 0.0);
        assert_eq!(m.n_error, 2);
    }

    #[test]
    fn table_confusion() {
        let c = Confusion {
            tp: 21,
            fp: 3,
            tn: 213,
            fn_: 3,
        };
        assert!((c.sensitivity().unwrap() - 0.8750).abs() < 5e-5);
        assert!((c.specificity().unwrap() - 0.9861).abs() < 5e-5);
        assert!((c.mcc() - 0.8611).abs() < 5e-5);
        assert_eq!(c.errors(), 6);
        let c = Confusion {
            tp: 3,
            fp: 1,
            tn: 5,
            fn_: 1,
        };
        assert_eq!(c.sensitivity(), Some(0.75));
        assert!((c.specificity().unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert!((c.mcc() - 0.583_333_333).abs() < 1e-8);
    }

    #[test]
    fn confusion_counts() {
        let truth = [true, false, true];
        assert_eq!(
            Confusion::new(&truth, &truth).unwrap(),
            Confusion {
                tp: 2,
                fp: 0,
                tn: 1,
                fn_: 0
            }
        );
        let c = Confusion::new(&truth, &[false, true, false]).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        assert!(Confusion::new(&truth, &[true]).is_err());
    }

    #[test]
    fn perfect_and_empty_selection() {
        let truth = [true, false, true];
        let m = selection_metrics(&truth, &truth).unwrap();
        assert_eq!(m.mcc, 1.0);
        assert_eq!(m.n_error, 0);
        let m = selection_metrics(&truth, &[false; 3]).unwrap();
        assert_eq!(m.mcc, 0.0);
        assert_eq!(m.sensitivity, Some(0.0));
        let m = selection_metrics(&[false; 2], &[false; 2]).unwrap();
        assert_eq!(m.sensitivity, None);
    }

    #[test]
    fn auc_examples() {
        let labels = [true, false, true, false];
        assert_eq!(auc(&[0.9, 0.1, 0.8, 0.3], &labels).unwrap(), 1.0);
        assert_eq!(auc(&[0.5; 4], &labels).unwrap(), 0.5);
        assert_eq!(auc(&[0.9, 0.8, 0.3, 0.1], &labels).unwrap(), 0.75);
        let scores = [0.7, 0.7, 0.2, 0.9, 0.2, 0.1];
        let labels = [true, false, true, false, false, true];
        assert!((auc(&scores, &labels).unwrap() - mann_whitney(&scores, &labels)).abs() < 1e-15);
        assert_eq!(auc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedAuc));
    }

    #[test]
    fn refit_recovers_exact_coefficients() {
        let x = Matrix::from_fn(6, 3, |r, c| {
            ((r * 7 + c * 3) % 5) as f64 + if r == c { 1.0 } else { 0.0 }
        });
        let beta = [2.0, -1.0];
        let y: Vec<f64> = (0..6).map(|r| 2.0 * x[(r, 0)] - x[(r, 2)]).collect();
        let data = Dataset::new(x.clone(), y.clone()).unwrap();
        let fit = ls_refit(&data, &[0, 2]).unwrap();
        for (a, b) in fit.iter().zip(beta) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(mspe(&x, &y, &[0, 2], &fit).unwrap() < 1e-18);
        assert_eq!(
            mspe(&x, &y, &[], &[]).unwrap(),
            y.iter().map(|v| v * v).sum::<f64>() / 6.0
        );
    }

    #[test]
    fn refit_residual_is_orthogonal() {
        let x = Matrix::from_fn(20, 5, |r, c| {
            libm::sin((r * 5 + c) as f64 * 1.7) + 0.1 * c as f64
        });
        let y: Vec<f64> = (0..20).map(|r| libm::cos(r as f64)).collect();
        let data = Dataset::new(x.clone(), y.clone()).unwrap();
        let sel = [0, 2, 4];
        let fit = ls_refit(&data, &sel).unwrap();
        for &j in &sel {
            let resid: f64 = (0..20)
                .map(|r| {
                    let yhat: f64 = sel.iter().zip(&fit).map(|(&k, b)| x[(r, k)] * b).sum();
                    (y[r] - yhat) * x[(r, j)]
                })
                .sum();
            assert!(resid.abs() < 1e-10);
        }
    }

    #[test]
    fn refit_rank_deficient() {
        let x = Matrix::from_fn(4, 2, |r, _| r as f64);
        let data = Dataset::new(x, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(ls_refit(&data, &[0, 1]), Err(Error::RankDeficient));
        let wide = Dataset::new(Matrix::identity(2), vec![1.0, 2.0]).unwrap();
        assert_eq!(ls_refit(&wide, &[0, 1]).unwrap(), vec![1.0, 2.0]);
    }
}
