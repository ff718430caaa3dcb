//! Inverted dropout masks for hidden activations and retained Fourier modes.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub(crate) fn check_rate(p: f64, what: &str) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config(format!("{what} dropout rate {p} is outside [0, 1)")));
    }
    Ok(())
}

/// `len` factors, each `0` with probability `p` and `1 / (1 - p)` otherwise.
pub fn weight_dropout_mask<T: Scalar>(len: usize, p: f64, rng: &mut dyn RngCore) -> Result<Vec<T>> {
    check_rate(p, "weight")?;
    if p == 0.0 {
        return Ok(vec![T::one(); len]);
    }
    let keep = T::lit(1.0 / (1.0 - p));
    Ok((0..len)
        .map(|_| if rng.random::<f64>() < p { T::zero() } else { keep })
        .collect())
}

/// One factor per retained mode; the DC mode is always kept unscaled.
pub fn fourier_dropout_mask<T: Scalar>(modes: usize, p: f64, rng: &mut dyn RngCore) -> Result<Vec<T>> {
    check_rate(p, "Fourier")?;
    let mut mask = vec![T::one(); modes];
    if p == 0.0 {
        return Ok(mask);
    }
    let keep = T::lit(1.0 / (1.0 - p));
    for f in mask.iter_mut().skip(1) {
        *f = if rng.random::<f64>() < p { T::zero() } else { keep };
    }
    Ok(mask)
}

/// Inverted dropout applied independently to every entry of a real tensor.
pub fn apply_weight_dropout<T: Scalar>(x: &Tensor<T>, p: f64, rng: &mut dyn RngCore) -> Result<Tensor<T>> {
    if x.is_complex() {
        return Err(Error::config("weight dropout acts on real activations"));
    }
    let mask = weight_dropout_mask::<T>(x.numel(), p, rng)?;
    let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Tensor::from_vec(x.shape().to_vec(), data)
}

/// Fourier dropout on complex `(C, K)` modes: whole modes are dropped across channels.
pub fn apply_fourier_dropout<T: Scalar>(modes: &Tensor<T>, p: f64, rng: &mut dyn RngCore) -> Result<Tensor<T>> {
    if !modes.is_complex() || modes.ndim() != 2 {
        return Err(Error::config("Fourier dropout acts on complex (C, K) modes"));
    }
    let k = modes.shape()[1];
    let mask = fourier_dropout_mask::<T>(k, p, rng)?;
    Ok(apply_mode_mask(modes, &mask))
}

pub(crate) fn apply_mode_mask<T: Scalar>(modes: &Tensor<T>, mask: &[T]) -> Tensor<T> {
    let k = mask.len();
    let mut out = modes.clone();
    for (i, pair) in out.data_mut().chunks_exact_mut(2).enumerate() {
        let f = mask[i % k];
        pair[0] *= f;
        pair[1] *= f;
    }
    out
}

/// Complex `(rows, K)` tensor holding `mask` on every row, for use as a tape constant.
pub(crate) fn mode_mask_tensor<T: Scalar>(rows: usize, mask: &[T]) -> Tensor<T> {
    let mut data = Vec::with_capacity(2 * rows * mask.len());
    for _ in 0..rows {
        for &f in mask {
            data.push(f);
            data.push(T::zero());
        }
    }
    Tensor::complex_from_interleaved(vec![rows, mask.len()], data).expect("layout is consistent")
}
