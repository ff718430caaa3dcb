//! Closed-form solutions of the periodic heat equation `u_t = u_xx`.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::scoring::GridFunction;

/// `exp(-(2 pi k / L)^2 t) sin(2 pi k x / L)` on `n` points of `[0, L)`.
pub fn heat_analytic(k: usize, t: f64, n: usize, domain_length: f64) -> Result<GridFunction<f64>> {
    if 2 * k >= n {
        return Err(Error::config(format!("wavenumber {k} is not below N/2 = {}", n / 2)));
    }
    if !(t >= 0.0) {
        return Err(Error::config("time must be non-negative"));
    }
    let wave = 2.0 * std::f64::consts::PI * k as f64 / domain_length;
    let amp = (-wave * wave * t).exp();
    let values = (0..n)
        .map(|j| amp * (wave * j as f64 * domain_length / n as f64).sin())
        .collect();
    GridFunction::periodic(values, domain_length)
}

/// Random sine series at time 0 and its exact evolution to time `t`, for modes `1..=max_mode`
/// with standard-uniform amplitudes in `[-1, 1]`.
pub fn heat_pair(
    n: usize,
    domain_length: f64,
    max_mode: usize,
    t: f64,
    rng: &mut dyn RngCore,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut a = vec![0.0; n];
    let mut u = vec![0.0; n];
    for k in 1..=max_mode {
        let c: f64 = rng.random_range(-1.0..=1.0);
        let f0 = heat_analytic(k, 0.0, n, domain_length)?;
        let ft = heat_analytic(k, t, n, domain_length)?;
        for j in 0..n {
            a[j] += c * f0.values()[j];
            u[j] += c * ft.values()[j];
        }
    }
    Ok((a, u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_state_is_unit_sine() {
        let f = heat_analytic(2, 0.0, 16, 1.0).unwrap();
        let peak = f.values().iter().cloned().fold(f64::MIN, f64::max);
        assert!((peak - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_wavenumber_decays_by_e() {
        let l = 2.0 * std::f64::consts::PI;
        let f = heat_analytic(1, 1.0, 16, l).unwrap();
        // x = L/4 is grid point 4
        assert!((f.values()[4] - (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn long_times_vanish() {
        let f = heat_analytic(3, 1e3, 32, 1.0).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nyquist_and_above_are_rejected() {
        assert!(heat_analytic(8, 0.0, 16, 1.0).is_err());
    }
}
