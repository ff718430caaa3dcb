//! Radix-2 FFT for real signals.
//!
//! A length-`N` real signal is packed into `N/2` complex samples, transformed with an
//! iterative decimation-in-time FFT and split into the `N/2 + 1` non-negative frequency
//! bins. Conventions: `X_k = sum_n x_n exp(-2 pi i k n / N)` (unnormalized forward) and
//! the inverse carries the `1/N` factor.

use std::any::{Any, TypeId};
use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of half-spectrum bins for a real signal of length `n`.
pub fn spectrum_len(n: usize) -> usize {
    n / 2 + 1
}

pub fn validate_len(n: usize) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::config(format!(
            "FFT length must be a power of two >= 2, got {n}"
        )));
    }
    Ok(())
}

/// Precomputed twiddles and bit-reversal table for one signal length.
#[derive(Debug, Clone)]
pub struct RealFft<T> {
    n: usize,
    half: usize,
    bitrev: Vec<usize>,
    // exp(-2 pi i j / half), j < half/2
    half_twiddles: Vec<Complex<T>>,
    // exp(-2 pi i k / n), k <= n/2
    split_twiddles: Vec<Complex<T>>,
}

impl<T: Scalar> RealFft<T> {
    pub fn new(n: usize) -> Result<Self> {
        validate_len(n)?;
        let half = n / 2;
        let bits = half.trailing_zeros();
        let bitrev = (0..half)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddle = |k: usize, m: usize| {
            let angle = -2.0 * std::f64::consts::PI * k as f64 / m as f64;
            Complex::new(T::lit(angle.cos()), T::lit(angle.sin()))
        };
        Ok(Self {
            n,
            half,
            bitrev,
            half_twiddles: (0..half / 2).map(|j| twiddle(j, half)).collect(),
            split_twiddles: (0..=half).map(|k| twiddle(k, n)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    // In-place complex FFT of length `half`; `inverse` conjugates twiddles (no scaling).
    fn complex_fft(&self, buf: &mut [Complex<T>], inverse: bool) {
        let m = self.half;
        for i in 0..m {
            let j = self.bitrev[i];
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= m {
            let step = m / len;
            for start in (0..m).step_by(len) {
                for j in 0..len / 2 {
                    let mut w = self.half_twiddles[j * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + j];
                    let b = buf[start + j + len / 2] * w;
                    buf[start + j] = a + b;
                    buf[start + j + len / 2] = a - b;
                }
            }
            len <<= 1;
        }
    }

    /// Forward transform of `input` (length `n`) into `output` (length `n/2 + 1`).
    pub fn forward(&self, input: &[T], output: &mut [Complex<T>]) {
        debug_assert_eq!(input.len(), self.n);
        debug_assert_eq!(output.len(), self.half + 1);
        let mut z: Vec<Complex<T>> = input
            .chunks_exact(2)
            .map(|p| Complex::new(p[0], p[1]))
            .collect();
        self.complex_fft(&mut z, false);
        let half_t = T::lit(0.5);
        for k in 0..=self.half {
            let zk = z[k % self.half];
            let zc = z[(self.half - k) % self.half].conj();
            let even = (zk + zc) * half_t;
            // (zk - zc) / (2i)
            let d = (zk - zc) * half_t;
            let odd = Complex::new(d.im, -d.re);
            output[k] = even + self.split_twiddles[k] * odd;
        }
        // The DC and Nyquist bins of a real signal are real.
        output[0].im = T::zero();
        output[self.half].im = T::zero();
    }

    /// Inverse transform of a half spectrum. The imaginary parts of the DC and
    /// Nyquist bins are ignored.
    pub fn inverse(&self, spectrum: &[Complex<T>], output: &mut [T]) {
        debug_assert_eq!(spectrum.len(), self.half + 1);
        debug_assert_eq!(output.len(), self.n);
        let half_t = T::lit(0.5);
        let bin = |k: usize| {
            let mut v = spectrum[k];
            if k == 0 || k == self.half {
                v.im = T::zero();
            }
            v
        };
        let mut z: Vec<Complex<T>> = (0..self.half)
            .map(|k| {
                let xk = bin(k);
                let xc = bin(self.half - k).conj();
                let even = (xk + xc) * half_t;
                let odd = (xk - xc) * half_t * self.split_twiddles[k].conj();
                even + Complex::new(-odd.im, odd.re)
            })
            .collect();
        self.complex_fft(&mut z, true);
        let scale = T::one() / T::from_usize_lossy(self.half);
        for (n, v) in z.iter().enumerate() {
            output[2 * n] = v.re * scale;
            output[2 * n + 1] = v.im * scale;
        }
    }
}

thread_local! {
    static PLANS: RefCell<HashMap<(TypeId, usize), Rc<dyn Any>>> = RefCell::new(HashMap::new());
}

/// Shared plan for length `n`, built once per thread.
pub fn plan<T: Scalar>(n: usize) -> Result<Rc<RealFft<T>>> {
    let key = (TypeId::of::<T>(), n);
    if let Some(p) = PLANS.with(|c| c.borrow().get(&key).cloned()) {
        return Ok(p.downcast::<RealFft<T>>().expect("plan type matches key"));
    }
    let p = Rc::new(RealFft::<T>::new(n)?);
    PLANS.with(|c| c.borrow_mut().insert(key, p.clone() as Rc<dyn Any>));
    Ok(p)
}

/// Forward real FFT, returning `n/2 + 1` bins.
pub fn fft_real<T: Scalar>(signal: &[T]) -> Result<Vec<Complex<T>>> {
    let p = plan::<T>(signal.len())?;
    let mut out = vec![Complex::new(T::zero(), T::zero()); spectrum_len(signal.len())];
    p.forward(signal, &mut out);
    Ok(out)
}

/// Inverse real FFT of a half spectrum to a length-`n` signal.
pub fn ifft_real<T: Scalar>(spectrum: &[Complex<T>], n: usize) -> Result<Vec<T>> {
    validate_len(n)?;
    if spectrum.len() != spectrum_len(n) {
        return Err(Error::config(format!(
            "spectrum of {} bins is inconsistent with signal length {n}",
            spectrum.len()
        )));
    }
    let p = plan::<T>(n)?;
    let mut out = vec![T::zero(); n];
    p.inverse(spectrum, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // O(N^2) oracle.
    fn naive_dft(x: &[f64]) -> Vec<Complex<f64>> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                x.iter().enumerate().fold(Complex::new(0.0, 0.0), |acc, (j, &v)| {
                    let a = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                    acc + Complex::new(a.cos(), a.sin()) * v
                })
            })
            .collect()
    }

    fn random_signal(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn constant_signal_is_dc_only() {
        let c = 1.75f64;
        let spec = fft_real(&[c; 8]).unwrap();
        assert_eq!(spec.len(), 5);
        assert!((spec[0].re - 8.0 * c).abs() < 1e-14 && spec[0].im.abs() < 1e-14);
        for z in &spec[1..] {
            assert!(z.norm() < 1e-14);
        }
    }

    #[test]
    fn sine_lands_in_bin_one() {
        let x: Vec<f64> = (0..8)
            .map(|n| (2.0 * std::f64::consts::PI * n as f64 / 8.0).sin())
            .collect();
        let spec = fft_real(&x).unwrap();
        assert!((spec[1] - Complex::new(0.0, -4.0)).norm() < 1e-12);
        for (k, z) in spec.iter().enumerate() {
            if k != 1 {
                assert!(z.norm() < 1e-12, "bin {k} = {z}");
            }
        }
    }

    #[test]
    fn matches_naive_dft_for_all_sizes() {
        for (i, n) in [2usize, 4, 8, 16, 32, 64, 128].into_iter().enumerate() {
            let x = random_signal(n, i as u64);
            let fast = fft_real(&x).unwrap();
            let slow = naive_dft(&x);
            let err = fast
                .iter()
                .zip(&slow)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "n = {n}: max abs diff {err}");
        }
    }

    #[test]
    fn inverse_of_bin_one_is_sine() {
        let mut spec = vec![Complex::new(0.0, 0.0); 5];
        spec[1] = Complex::new(0.0, -4.0);
        let x = ifft_real(&spec, 8).unwrap();
        for (n, v) in x.iter().enumerate() {
            let expect = (2.0 * std::f64::consts::PI * n as f64 / 8.0).sin();
            assert!((v - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_spectrum_gives_zero_signal() {
        let x = ifft_real(&vec![Complex::new(0.0, 0.0); 33], 64).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(matches!(fft_real::<f64>(&[]), Err(Error::Config(_))));
        assert!(matches!(fft_real(&[1.0f64; 7]), Err(Error::Config(_))));
        assert!(matches!(fft_real(&[1.0f64; 12]), Err(Error::Config(_))));
        assert!(ifft_real(&[Complex::new(0.0f64, 0.0); 4], 8).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let x: Vec<f32> = (0..16).map(|n| (n as f32 * 0.3).cos()).collect();
        let back = ifft_real(&fft_real(&x).unwrap(), 16).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    proptest! {
        #[test]
        fn roundtrip_is_identity(x in proptest::collection::vec(-10.0f64..10.0, 64)) {
            let back = ifft_real(&fft_real(&x).unwrap(), 64).unwrap();
            let scale = x.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn parseval_holds(log_n in 3u32..7, seed in 0u64..1000) {
            let n = 1usize << log_n;
            let x = random_signal(n, seed);
            let spec = fft_real(&x).unwrap();
            let time: f64 = x.iter().map(|v| v * v).sum();
            let mut freq = spec[0].norm_sqr() + spec[n / 2].norm_sqr();
            freq += 2.0 * spec[1..n / 2].iter().map(|z| z.norm_sqr()).sum::<f64>();
            freq /= n as f64;
            prop_assert!((time - freq).abs() <= 1e-10 * time);
        }
    }
}
