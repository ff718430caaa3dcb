//! Univariate ensemble CRPS, quantile score and empirical quantiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Normalization of the ensemble spread term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrpsKind {
    /// Unbiased for the CRPS of the sampled law: spread divided by `2M(M-1)`.
    Fair,
    /// CRPS of the empirical distribution itself: spread divided by `2M^2`.
    Nrg,
}

impl CrpsKind {
    pub fn min_members(self) -> usize {
        match self {
            CrpsKind::Fair => 2,
            CrpsKind::Nrg => 1,
        }
    }
}

fn sorted<T: Scalar>(samples: &[T]) -> Vec<T> {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("samples are not NaN"));
    s
}

/// `sum_{j < h} |x_j - x_h|` in `O(M log M)` from the sorted samples.
fn pairwise_abs_sum<T: Scalar>(sorted: &[T]) -> T {
    let m = sorted.len();
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| x * T::from_isize(2 * i as isize - m as isize + 1).expect("small integer"))
        .sum()
}

pub fn crps_ensemble<T: Scalar>(samples: &[T], obs: T, kind: CrpsKind) -> Result<T> {
    let m = samples.len();
    if m < kind.min_members() {
        return Err(Error::EstimatorUndefined(format!(
            "{kind:?} CRPS needs at least {} samples, got {m}",
            kind.min_members()
        )));
    }
    Ok(crps_sorted(&sorted(samples), obs, kind))
}

/// CRPS for samples already sorted ascending; the caller guarantees the member minimum.
pub(crate) fn crps_sorted<T: Scalar>(sorted: &[T], obs: T, kind: CrpsKind) -> T {
    let mt = T::from_usize_lossy(sorted.len());
    let fit = sorted.iter().map(|&x| (x - obs).abs()).sum::<T>() / mt;
    // ordered-pair sum = 2 * pairwise_abs_sum
    let pairs = T::lit(2.0) * pairwise_abs_sum(sorted);
    let denom = match kind {
        CrpsKind::Fair => T::lit(2.0) * mt * (mt - T::one()),
        CrpsKind::Nrg => T::lit(2.0) * mt * mt,
    };
    fit - pairs / denom
}

/// `QS_a(q, y) = 2 (a - 1{y < q}) (y - q)`.
pub fn quantile_score<T: Scalar>(q: T, obs: T, alpha: T) -> Result<T> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::config(format!("quantile level {alpha} is outside (0, 1)")));
    }
    let indicator = if obs < q { T::one() } else { T::zero() };
    Ok(T::lit(2.0) * (alpha - indicator) * (obs - q))
}

/// Linear interpolation between order statistics at `h = p (M - 1) + 1` (1-based).
pub fn empirical_quantile<T: Scalar>(samples: &[T], p: T) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::config("empirical quantile of an empty sample"));
    }
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::config(format!("quantile level {p} is outside [0, 1]")));
    }
    Ok(quantile_sorted(&sorted(samples), p))
}

/// Quantile function of the empirical distribution itself: the smallest sample `x` with
/// `F_M(x) >= p`, i.e. the order statistic `x_(ceil(p M))`.
pub fn empirical_cdf_quantile<T: Scalar>(samples: &[T], p: T) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::config("empirical quantile of an empty sample"));
    }
    if !(p > T::zero() && p <= T::one()) {
        return Err(Error::config(format!("quantile level {p} is outside (0, 1]")));
    }
    let s = sorted(samples);
    let k = (p * T::from_usize_lossy(s.len())).ceil().to_usize().unwrap_or(1);
    Ok(s[k.clamp(1, s.len()) - 1])
}

pub(crate) fn quantile_sorted<T: Scalar>(sorted: &[T], p: T) -> T {
    let m = sorted.len();
    let pos = p * T::from_usize_lossy(m - 1);
    let lo = pos.floor().to_usize().unwrap_or(0).min(m - 1);
    let hi = pos.ceil().to_usize().unwrap_or(0).min(m - 1);
    let frac = pos - pos.floor();
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}
