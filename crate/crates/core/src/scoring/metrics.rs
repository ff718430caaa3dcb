//! Verification metrics over whole predicted fields.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scoring::crps::{crps_sorted, quantile_sorted, CrpsKind};
use crate::scoring::grid::{GridFunction, PredictiveEnsemble};

/// Variances at or below this value are replaced by it in the NLL.
pub const NLL_VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllValue<T> {
    pub value: T,
    /// Grid points whose variance hit the floor.
    pub floored_points: usize,
}

/// Pointwise Gaussian NLL averaged over the grid:
/// `(1/2N) sum_i [ln(2 pi s_i^2) + (m_i - y_i)^2 / s_i^2]`.
pub fn gaussian_nll<T: Scalar>(
    mean: &GridFunction<T>,
    var: &GridFunction<T>,
    obs: &GridFunction<T>,
) -> Result<NllValue<T>> {
    mean.check_same_grid(var)?;
    mean.check_same_grid(obs)?;
    let floor = T::lit(NLL_VARIANCE_FLOOR);
    let two_pi = T::lit(2.0) * T::PI();
    let mut floored_points = 0;
    let mut acc = T::zero();
    for ((&m, &v), &y) in mean.values().iter().zip(var.values()).zip(obs.values()) {
        let v = if v <= floor || v.is_nan() {
            floored_points += 1;
            floor
        } else {
            v
        };
        acc += (two_pi * v).ln() + (m - y) * (m - y) / v;
    }
    let n = T::from_usize_lossy(mean.len());
    Ok(NllValue {
        value: acc / (T::lit(2.0) * n),
        floored_points,
    })
}

/// Pointwise sample variance of an ensemble (`M - 1` denominator).
pub fn ensemble_variance<T: Scalar>(ensemble: &PredictiveEnsemble<T>) -> Result<GridFunction<T>> {
    let m = ensemble.size();
    if m < 2 {
        return Err(Error::EstimatorUndefined(format!(
            "sample variance needs M >= 2 members, got {m}"
        )));
    }
    let mean = ensemble.mean();
    let denom = T::from_usize_lossy(m - 1);
    let values = (0..ensemble.grid_len())
        .map(|i| {
            let mu = mean.values()[i];
            ensemble
                .members()
                .iter()
                .map(|f| (f.values()[i] - mu) * (f.values()[i] - mu))
                .sum::<T>()
                / denom
        })
        .collect();
    GridFunction::with_weight(values, ensemble.weight())
}

/// NLL of the Gaussian with the ensemble's pointwise mean and sample variance.
pub fn ensemble_nll<T: Scalar>(
    ensemble: &PredictiveEnsemble<T>,
    obs: &GridFunction<T>,
) -> Result<NllValue<T>> {
    ensemble.check_obs(obs)?;
    gaussian_nll(&ensemble.mean(), &ensemble_variance(ensemble)?, obs)
}

/// Fraction of grid points whose observation lies in the closed central `1 - alpha`
/// interval of the member values, and the mean interval width.
pub fn coverage_and_width<T: Scalar>(
    ensemble: &PredictiveEnsemble<T>,
    obs: &GridFunction<T>,
    alpha: T,
) -> Result<(T, T)> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::config(format!("interval level {alpha} is outside (0, 1)")));
    }
    ensemble.check_obs(obs)?;
    let lo_p = alpha / T::lit(2.0);
    let hi_p = T::one() - lo_p;
    let mut covered = 0usize;
    let mut width = T::zero();
    let mut buf = Vec::with_capacity(ensemble.size());
    for (i, &y) in obs.values().iter().enumerate() {
        buf.clear();
        buf.extend(ensemble.members().iter().map(|f| f.values()[i]));
        buf.sort_by(|a, b| a.partial_cmp(b).expect("members are not NaN"));
        let lo = quantile_sorted(&buf, lo_p);
        let hi = quantile_sorted(&buf, hi_p);
        if y >= lo && y <= hi {
            covered += 1;
        }
        width += hi - lo;
    }
    let n = T::from_usize_lossy(obs.len());
    Ok((T::from_usize_lossy(covered) / n, width / n))
}

/// Grid-averaged ensemble CRPS.
pub fn crps_field<T: Scalar>(
    ensemble: &PredictiveEnsemble<T>,
    obs: &GridFunction<T>,
    kind: CrpsKind,
) -> Result<T> {
    if ensemble.size() < kind.min_members() {
        return Err(Error::EstimatorUndefined(format!(
            "{kind:?} CRPS needs at least {} members, got {}",
            kind.min_members(),
            ensemble.size()
        )));
    }
    ensemble.check_obs(obs)?;
    let mut buf = Vec::with_capacity(ensemble.size());
    let mut acc = T::zero();
    for (i, &y) in obs.values().iter().enumerate() {
        buf.clear();
        buf.extend(ensemble.members().iter().map(|f| f.values()[i]));
        buf.sort_by(|a, b| a.partial_cmp(b).expect("members are not NaN"));
        acc += crps_sorted(&buf, y, kind);
    }
    Ok(acc / T::from_usize_lossy(obs.len()))
}

/// `||mean - obs||` in the discretized L2 norm.
pub fn l2_metric<T: Scalar>(ensemble: &PredictiveEnsemble<T>, obs: &GridFunction<T>) -> Result<T> {
    ensemble.check_obs(obs)?;
    Ok(ensemble.mean().distance_unchecked(obs))
}

/// `||mean - obs|| / ||obs||`, for reporting only.
pub fn relative_l2_metric<T: Scalar>(
    ensemble: &PredictiveEnsemble<T>,
    obs: &GridFunction<T>,
) -> Result<T> {
    let n = obs.norm();
    if n == T::zero() {
        return Err(Error::config("relative L2 against a zero observation"));
    }
    Ok(l2_metric(ensemble, obs)? / n)
}
