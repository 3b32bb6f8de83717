//! Two-sided pooled two-proportion z-test.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// P-value for the difference between proportions `k1/n1` and `k2/n2`.
///
/// Uses the pooled z statistic with a two-sided normal tail. When the pooled
/// variance is zero (every trial agreed), the p-value is 1 for equal
/// proportions and 0 otherwise, the limits of the statistic.
pub fn two_proportion_test(k1: u64, n1: u64, k2: u64, n2: u64) -> Result<f64> {
    for (k, n) in [(k1, n1), (k2, n2)] {
        if n == 0 {
            return Err(Error::InvalidInput("trial count must be at least 1".into()));
        }
        if k > n {
            return Err(Error::InvalidInput(format!(
                "{k} successes out of {n} trials"
            )));
        }
    }
    let p1 = k1 as f64 / n1 as f64;
    let p2 = k2 as f64 / n2 as f64;
    let pooled = (k1 + k2) as f64 / (n1 + n2) as f64;
    let variance = pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64);
    if variance == 0.0 {
        return Ok(if p1 == p2 { 1.0 } else { 0.0 });
    }
    let z = (p1 - p2) / variance.sqrt();
    Ok(erfc(z.abs() / std::f64::consts::SQRT_2))
}
