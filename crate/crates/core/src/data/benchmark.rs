//! Linear-Gaussian functional benchmark with a known conditional law: `u = A a + eta`
//! where `A` keeps the modes below `K_smooth / 2` and halves them, and `eta` is white noise
//! with standard deviation `sigma_eta`. Given `a`, each grid value of `u` is
//! `N((A a)_i, sigma_eta^2)`.

use num_complex::Complex64;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fft::{self, spectrum_len};

fn check(n: usize, k_smooth: usize) -> Result<()> {
    fft::validate_len(n)?;
    if k_smooth == 0 || k_smooth > n / 2 {
        return Err(Error::config(format!(
            "K_smooth must lie in 1..={} for a {n}-point grid, got {k_smooth}",
            n / 2
        )));
    }
    Ok(())
}

/// `(1/sqrt(K)) [c_0 + sum_{0<k<K} (c_k cos(2 pi k x) + s_k sin(2 pi k x))]` with i.i.d.
/// standard-normal coefficients, so every grid value has unit variance.
pub fn band_limited_field(n: usize, k_smooth: usize, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
    check(n, k_smooth)?;
    let mut spec = vec![Complex64::new(0.0, 0.0); spectrum_len(n)];
    let scale = 1.0 / (k_smooth as f64).sqrt();
    let half = n as f64 / 2.0;
    for (k, bin) in spec.iter_mut().enumerate().take(k_smooth) {
        let c: f64 = StandardNormal.sample(&mut *rng);
        if k == 0 {
            *bin = Complex64::new(n as f64 * c * scale, 0.0);
        } else {
            let s: f64 = StandardNormal.sample(&mut *rng);
            *bin = Complex64::new(half * c * scale, -half * s * scale);
        }
    }
    fft::ifft_real(&spec, n)
}

/// The benchmark operator `A`: keep modes `k < K_smooth / 2`, multiply them by 1/2.
pub fn low_pass_halve(a: &[f64], k_smooth: usize) -> Result<Vec<f64>> {
    check(a.len(), k_smooth)?;
    let mut spec = fft::fft_real(a)?;
    for (k, z) in spec.iter_mut().enumerate() {
        *z = if 2 * k < k_smooth { *z * 0.5 } else { Complex64::new(0.0, 0.0) };
    }
    fft::ifft_real(&spec, a.len())
}

/// One draw: `(a, A a, u)`.
pub type BenchmarkDraw = (Vec<f64>, Vec<f64>, Vec<f64>);

/// `n_samples` independent draws on an `n`-point grid.
pub fn gaussian_functional_benchmark(
    n_samples: usize,
    n: usize,
    k_smooth: usize,
    sigma_eta: f64,
    rng: &mut dyn RngCore,
) -> Result<Vec<BenchmarkDraw>> {
    if !(sigma_eta >= 0.0 && sigma_eta.is_finite()) {
        return Err(Error::config("sigma_eta must be finite and non-negative"));
    }
    (0..n_samples)
        .map(|_| {
            let a = band_limited_field(n, k_smooth, rng)?;
            let mean = low_pass_halve(&a, k_smooth)?;
            let u = mean
                .iter()
                .map(|&m| {
                    let e: f64 = StandardNormal.sample(&mut *rng);
                    m + sigma_eta * e
                })
                .collect();
            Ok((a, mean, u))
        })
        .collect()
}

/// Expected CRPS of the true predictive `N(mu, sigma^2)` when `y ~ N(mu, sigma^2)`:
/// `sigma / sqrt(pi)`.
pub fn optimal_expected_crps(sigma: f64) -> f64 {
    sigma / std::f64::consts::PI.sqrt()
}
