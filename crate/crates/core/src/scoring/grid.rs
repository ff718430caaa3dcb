use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `sqrt(w * sum v_i^2)`, rescaled by the largest magnitude so tiny or huge values
/// neither underflow nor overflow.
fn scaled_norm<T: Scalar>(values: impl Iterator<Item = T> + Clone, weight: T) -> T {
    let scale = values.clone().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let ss: T = values.map(|v| (v / scale) * (v / scale)).sum();
    scale * (weight * ss).sqrt()
}

/// A real function sampled on a uniform grid, carrying its per-point quadrature weight.
///
/// On a periodic grid of `N` points over a domain of length `L` the weight is `L / N`, so
/// [`GridFunction::norm`] is the discretized L2 norm `sqrt(w * sum f_i^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    values: Vec<T>,
    weight: T,
}

impl<T: Scalar> GridFunction<T> {
    /// Samples on a periodic grid of `values.len() >= 2` points over length `domain_length`.
    pub fn periodic(values: Vec<T>, domain_length: T) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::config(format!(
                "a periodic grid needs at least 2 points, got {}",
                values.len()
            )));
        }
        if !(domain_length > T::zero()) {
            return Err(Error::config("domain length must be positive"));
        }
        let weight = domain_length / T::from_usize_lossy(values.len());
        Ok(Self { values, weight })
    }

    /// Arbitrary non-empty sample set with an explicit positive point weight.
    pub fn with_weight(values: Vec<T>, weight: T) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("grid function needs at least one point"));
        }
        if !(weight > T::zero()) {
            return Err(Error::config("point weight must be positive"));
        }
        Ok(Self { values, weight })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn weight(&self) -> T {
        self.weight
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> T {
        scaled_norm(self.values.iter().copied(), self.weight)
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.values.len() != other.values.len() || self.weight != other.weight {
            return Err(Error::config(format!(
                "grid mismatch: {} points (w = {}) vs {} points (w = {})",
                self.values.len(),
                self.weight,
                other.values.len(),
                other.weight
            )));
        }
        Ok(())
    }

    /// `||self - other||`, requiring a common grid.
    pub fn distance(&self, other: &Self) -> Result<T> {
        self.check_same_grid(other)?;
        Ok(self.distance_unchecked(other))
    }

    pub(crate) fn distance_unchecked(&self, other: &Self) -> T {
        scaled_norm(
            self.values.iter().zip(&other.values).map(|(&a, &b)| a - b),
            self.weight,
        )
    }

    pub fn shifted(&self, c: T) -> Self {
        Self {
            values: self.values.iter().map(|&v| v + c).collect(),
            weight: self.weight,
        }
    }
}

/// `M >= 1` sampled output functions on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveEnsemble<T> {
    members: Vec<GridFunction<T>>,
}

impl<T: Scalar> PredictiveEnsemble<T> {
    pub fn new(members: Vec<GridFunction<T>>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::config("ensemble needs at least one member"))?;
        for m in &members[1..] {
            first.check_same_grid(m)?;
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[GridFunction<T>] {
        &self.members
    }

    /// Ensemble size `M`.
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn grid_len(&self) -> usize {
        self.members[0].len()
    }

    pub fn weight(&self) -> T {
        self.members[0].weight()
    }

    pub fn mean(&self) -> GridFunction<T> {
        let m = T::from_usize_lossy(self.size());
        let values = (0..self.grid_len())
            .map(|i| self.members.iter().map(|f| f.values[i]).sum::<T>() / m)
            .collect();
        GridFunction {
            values,
            weight: self.weight(),
        }
    }

    /// Member values at grid point `i`.
    pub fn point_samples(&self, i: usize) -> Vec<T> {
        self.members.iter().map(|f| f.values[i]).collect()
    }

    pub fn shifted(&self, c: T) -> Self {
        Self {
            members: self.members.iter().map(|f| f.shifted(c)).collect(),
        }
    }

    pub(crate) fn check_obs(&self, obs: &GridFunction<T>) -> Result<()> {
        self.members[0].check_same_grid(obs)
    }
}
