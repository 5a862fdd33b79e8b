//! Means with normal-approximation confidence intervals and two-sided
//! z tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special;

pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate<T = f64> {
    pub mean: T,
    pub ci_low: T,
    pub ci_high: T,
    pub n: usize,
    pub level: f64,
}

impl<T: Real> IntervalEstimate<T> {
    pub fn width(&self) -> T {
        self.ci_high - self.ci_low
    }
}

pub fn mean<T: Real>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let n = T::from_usize(values.len()).unwrap();
    Some(values.iter().copied().sum::<T>() / n)
}

/// Sample standard deviation (n - 1 denominator); zero for a single value.
pub fn sample_sd<T: Real>(values: &[T]) -> Option<T> {
    let m = mean(values)?;
    if values.len() < 2 {
        return Some(T::zero());
    }
    let ss: T = values.iter().map(|&v| (v - m) * (v - m)).sum();
    Some((ss / T::from_usize(values.len() - 1).unwrap()).sqrt())
}

/// Two-sided critical value of the standard normal for a confidence level.
pub fn z_critical(level: f64) -> f64 {
    special::normal_quantile((1.0 + level) / 2.0)
}

/// `mean ± z·sd/√n`.
pub fn mean_ci<T: Real>(values: &[T], level: f64) -> Result<IntervalEstimate<T>> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::InvalidArgument(format!("confidence level {level}")));
    }
    let m = mean(values).ok_or_else(|| Error::InsufficientData("mean of empty sample".into()))?;
    let sd = sample_sd(values).unwrap();
    let half = T::lit(z_critical(level)) * sd / T::from_usize(values.len()).unwrap().sqrt();
    Ok(IntervalEstimate {
        mean: m,
        ci_low: m - half,
        ci_high: m + half,
        n: values.len(),
        level,
    })
}

/// Two-sided p-value for H0: population mean is zero.
pub fn mean_zero_test<T: Real>(values: &[T]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "mean-zero test needs n >= 2, got {}",
            values.len()
        )));
    }
    let m = mean(values).unwrap().as_f64();
    let sd = sample_sd(values).unwrap().as_f64();
    Ok(degenerate_or_p(m, sd / (values.len() as f64).sqrt()))
}

/// Welch-style two-sample z test, two-sided.
pub fn two_sample_test<T: Real>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "two-sample test needs n >= 2 per side, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ma, mb) = (mean(a).unwrap().as_f64(), mean(b).unwrap().as_f64());
    let (sa, sb) = (sample_sd(a).unwrap().as_f64(), sample_sd(b).unwrap().as_f64());
    let se = (sa * sa / a.len() as f64 + sb * sb / b.len() as f64).sqrt();
    Ok(degenerate_or_p(ma - mb, se))
}

fn degenerate_or_p(diff: f64, se: f64) -> f64 {
    if se == 0.0 {
        if diff == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        special::two_sided_p(diff / se)
    }
}

/// Proportion `k / n` with the binomial normal-approximation interval
/// `p ± z·sqrt(p(1-p)/n)`.
pub fn proportion_ci(k: usize, n: usize, level: f64) -> Result<IntervalEstimate<f64>> {
    if n == 0 {
        return Err(Error::InsufficientData("proportion of zero trials".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("{k} successes out of {n}")));
    }
    let p = k as f64 / n as f64;
    let half = z_critical(level) * (p * (1.0 - p) / n as f64).sqrt();
    Ok(IntervalEstimate {
        mean: p,
        ci_low: p - half,
        ci_high: p + half,
        n,
        level,
    })
}
