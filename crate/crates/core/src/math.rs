//! Scalar math through `libm`, so results agree bit for bit with or without `std`.

pub use core::f64::consts::{LN_2, PI};

pub const LN_PI: f64 = 1.144_729_885_849_400_2;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

/// Natural log of the Gamma function for positive arguments.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `log(sum(exp(xs)))` with max subtraction. Empty or all `-inf` input gives `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| exp(x - max)).sum();
    max + ln(sum)
}

/// Streaming log-sum-exp accumulator; `merge` lets workers combine partial sums.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }
}

impl LogSumExp {
    pub fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.sum += exp(x - self.max);
        } else {
            self.sum = self.sum * exp(self.max - x) + 1.0;
            self.max = x;
        }
    }

    pub fn merge(&mut self, other: &LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if self.max == f64::NEG_INFINITY {
            *self = *other;
        } else if other.max <= self.max {
            self.sum += other.sum * exp(other.max - self.max);
        } else {
            self.sum = self.sum * exp(self.max - other.max) + other.sum;
            self.max = other.max;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + ln(self.sum)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_pi_constant() {
        assert!((LN_PI - ln(PI)).abs() < 1e-15);
    }

    #[test]
    fn ln_gamma_half() {
        assert!((ln_gamma(0.5) - 0.5 * LN_PI).abs() < 1e-14);
        assert!((ln_gamma(5.0) - ln(24.0)).abs() < 1e-13);
    }

    #[test]
    fn streaming_matches_batch() {
        let xs = [-3.0, 100.0, 99.5, f64::NEG_INFINITY, -700.0];
        let mut acc = LogSumExp::default();
        let mut left = LogSumExp::default();
        let mut right = LogSumExp::default();
        for (k, &x) in xs.iter().enumerate() {
            acc.push(x);
            if k < 2 {
                left.push(x)
            } else {
                right.push(x)
            }
        }
        left.merge(&right);
        assert!((acc.value() - log_sum_exp(&xs)).abs() < 1e-12);
        assert!((left.value() - log_sum_exp(&xs)).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
