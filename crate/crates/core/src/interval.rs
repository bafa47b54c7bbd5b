//! Probability intervals and the estimators that derive them from counts.

use serde::{Deserialize, Serialize};
use statrs::function::beta::checked_beta_reg;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntervalError {
    #[error("invalid probability interval [{low}, {high}]")]
    Invalid { low: f64, high: f64 },
    #[error("count {k} exceeds sample size {n}")]
    CountAboveTotal { k: u64, n: u64 },
    #[error("sample size must be positive")]
    NoSamples,
    #[error("significance level {0} outside (0, 1)")]
    Significance(f64),
}

/// `[low, high] ⊆ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityInterval {
    low: f64,
    high: f64,
}

impl ProbabilityInterval {
    pub fn new(low: f64, high: f64) -> Result<Self, IntervalError> {
        if (0.0..=1.0).contains(&low) && (0.0..=1.0).contains(&high) && low <= high {
            Ok(ProbabilityInterval { low, high })
        } else {
            Err(IntervalError::Invalid { low, high })
        }
    }

    pub fn point(p: f64) -> Result<Self, IntervalError> {
        Self::new(p, p)
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn contains(&self, p: f64) -> bool {
        self.low <= p && p <= self.high
    }

    pub fn is_degenerate(&self) -> bool {
        self.low == self.high
    }

    /// Same interval with the upper end raised by `extra`, capped at 1.
    pub fn widen_high(&self, extra: f64) -> Self {
        ProbabilityInterval {
            low: self.low,
            high: (self.high + extra).min(1.0),
        }
    }
}

/// Turns a success count `k` out of `n` trials into a probability interval.
pub trait IntervalEstimator: Sync {
    fn interval(&self, k: u64, n: u64) -> Result<ProbabilityInterval, IntervalError>;
}

/// Exact two-sided binomial interval; covers the true parameter with
/// probability at least `1 − significance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClopperPearson {
    pub significance: f64,
}

impl IntervalEstimator for ClopperPearson {
    fn interval(&self, k: u64, n: u64) -> Result<ProbabilityInterval, IntervalError> {
        clopper_pearson(k, n, self.significance)
    }
}

/// Frequentist point estimate `[k/n, k/n]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointEstimate;

impl IntervalEstimator for PointEstimate {
    fn interval(&self, k: u64, n: u64) -> Result<ProbabilityInterval, IntervalError> {
        check_counts(k, n)?;
        ProbabilityInterval::point(k as f64 / n as f64)
    }
}

fn check_counts(k: u64, n: u64) -> Result<(), IntervalError> {
    if n == 0 {
        return Err(IntervalError::NoSamples);
    }
    if k > n {
        return Err(IntervalError::CountAboveTotal { k, n });
    }
    Ok(())
}

/// Clopper–Pearson interval at significance `beta`:
/// `low = I⁻¹(β/2; k, n−k+1)`, `high = I⁻¹(1−β/2; k+1, n−k)` with `I` the
/// regularized incomplete beta function, and `low = 0` for `k = 0`,
/// `high = 1` for `k = n`.
pub fn clopper_pearson(k: u64, n: u64, beta: f64) -> Result<ProbabilityInterval, IntervalError> {
    check_counts(k, n)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(IntervalError::Significance(beta));
    }
    let half = beta / 2.0;
    let nf = n as f64;
    let low = if k == 0 {
        0.0
    } else if k == n {
        half.powf(1.0 / nf)
    } else {
        inverse_beta_reg(k as f64, (n - k + 1) as f64, half)
    };
    let high = if k == n {
        1.0
    } else if k == 0 {
        1.0 - half.powf(1.0 / nf)
    } else {
        inverse_beta_reg((k + 1) as f64, (n - k) as f64, 1.0 - half)
    };
    ProbabilityInterval::new(low, high)
}

/// `x` with `I_x(a, b) = target`, by bisection down to adjacent floats.
fn inverse_beta_reg(a: f64, b: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        // a, b > 0 and mid ∈ (0, 1), so the checked variant cannot fail
        let v = checked_beta_reg(a, b, mid).unwrap_or(f64::NAN);
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
