//! Kuramoto–Sivashinsky `u_t + u u_x + u_xx + u_xxxx = 0` on a periodic domain, integrated
//! in Fourier space with ETDRK4 (Cox–Matthews scheme, contour-integral coefficients after
//! Kassam and Trefethen).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{self, spectrum_len, validate_len};
use crate::scoring::GridFunction;

/// Contour points used for the `phi` coefficients.
const CONTOUR_POINTS: usize = 32;

/// Precomputed ETDRK4 coefficients for one grid, domain and step size.
#[derive(Debug, Clone)]
pub struct KsSolver {
    n: usize,
    domain_length: f64,
    dt: f64,
    e: Vec<f64>,
    e2: Vec<f64>,
    q: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
    // -i q / 2, zeroed outside the 2/3 band
    g: Vec<Complex64>,
    keep: Vec<bool>,
}

impl KsSolver {
    pub fn new(n: usize, domain_length: f64, dt: f64) -> Result<Self> {
        validate_len(n)?;
        if !(domain_length > 0.0 && domain_length.is_finite()) {
            return Err(Error::config("domain length must be positive"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("time step must be positive"));
        }
        let bins = spectrum_len(n);
        let contour: Vec<Complex64> = (0..CONTOUR_POINTS)
            .map(|j| {
                let theta = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / CONTOUR_POINTS as f64;
                Complex64::from_polar(1.0, theta)
            })
            .collect();
        let mut s = Self {
            n,
            domain_length,
            dt,
            e: Vec::with_capacity(bins),
            e2: Vec::with_capacity(bins),
            q: Vec::with_capacity(bins),
            f1: Vec::with_capacity(bins),
            f2: Vec::with_capacity(bins),
            f3: Vec::with_capacity(bins),
            g: Vec::with_capacity(bins),
            keep: Vec::with_capacity(bins),
        };
        for k in 0..bins {
            let wave = 2.0 * std::f64::consts::PI * k as f64 / domain_length;
            let lin = wave * wave - wave.powi(4);
            let hl = dt * lin;
            let mean = |f: &dyn Fn(Complex64) -> Complex64| {
                contour.iter().map(|&r| f(hl + r)).sum::<Complex64>().re / CONTOUR_POINTS as f64
            };
            s.e.push(hl.exp());
            s.e2.push((hl / 2.0).exp());
            s.q.push(dt * mean(&|z| ((z / 2.0).exp() - 1.0) / z));
            s.f1.push(dt * mean(&|z| (-4.0 - z + z.exp() * (4.0 - 3.0 * z + z * z)) / z.powi(3)));
            s.f2.push(dt * mean(&|z| (2.0 + z + z.exp() * (z - 2.0)) / z.powi(3)));
            s.f3.push(dt * mean(&|z| (-4.0 - 3.0 * z - z * z + z.exp() * (4.0 - z)) / z.powi(3)));
            // 2/3 rule: wavenumbers above N/3 never feed the quadratic term.
            let keep = 3 * k <= n && k < n / 2;
            s.keep.push(keep);
            s.g.push(if keep { Complex64::new(0.0, -0.5 * wave) } else { Complex64::new(0.0, 0.0) });
        }
        Ok(s)
    }

    pub fn grid_points(&self) -> usize {
        self.n
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `-1/2 d/dx (u^2)` in Fourier space, dealiased.
    fn nonlinear(&self, v: &[Complex64]) -> Vec<Complex64> {
        let filtered: Vec<Complex64> = v
            .iter()
            .zip(&self.keep)
            .map(|(&z, &k)| if k { z } else { Complex64::new(0.0, 0.0) })
            .collect();
        let u = fft::ifft_real(&filtered, self.n).expect("length validated");
        let sq: Vec<f64> = u.iter().map(|x| x * x).collect();
        let spec = fft::fft_real(&sq).expect("length validated");
        spec.iter().zip(&self.g).map(|(s, g)| s * g).collect()
    }

    /// One ETDRK4 step of the spectrum `v` in place.
    pub fn step(&self, v: &mut [Complex64]) {
        let nv = self.nonlinear(v);
        let a: Vec<Complex64> = (0..v.len()).map(|k| v[k] * self.e2[k] + nv[k] * self.q[k]).collect();
        let na = self.nonlinear(&a);
        let b: Vec<Complex64> = (0..v.len()).map(|k| v[k] * self.e2[k] + na[k] * self.q[k]).collect();
        let nb = self.nonlinear(&b);
        let c: Vec<Complex64> = (0..v.len())
            .map(|k| a[k] * self.e2[k] + (nb[k] * 2.0 - nv[k]) * self.q[k])
            .collect();
        let nc = self.nonlinear(&c);
        for k in 0..v.len() {
            v[k] = v[k] * self.e[k]
                + nv[k] * self.f1[k]
                + (na[k] + nb[k]) * (2.0 * self.f2[k])
                + nc[k] * self.f3[k];
        }
    }

    /// Advances `u0` by `burn_in` steps, then records `frames` snapshots `save_every` steps
    /// apart (the first snapshot is the state after burn-in).
    pub fn run(&self, u0: &[f64], burn_in: usize, save_every: usize, frames: usize) -> Result<Trajectory> {
        if u0.len() != self.n {
            return Err(Error::config(format!(
                "initial condition has {} points, solver grid has {}",
                u0.len(),
                self.n
            )));
        }
        if save_every == 0 {
            return Err(Error::config("save interval must be at least one step"));
        }
        let mut v = fft::fft_real(u0)?;
        let mut step = 0usize;
        let advance = |v: &mut Vec<Complex64>, count: usize, step: &mut usize| -> Result<()> {
            for _ in 0..count {
                self.step(v);
                *step += 1;
                if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::BlowUp { step: *step });
                }
            }
            Ok(())
        };
        advance(&mut v, burn_in, &mut step)?;
        let mut out = Vec::with_capacity(frames);
        for f in 0..frames {
            if f > 0 {
                advance(&mut v, save_every, &mut step)?;
            }
            out.push(fft::ifft_real(&v, self.n)?);
        }
        Ok(Trajectory {
            frames: out,
            dt: self.dt,
            save_every,
            domain_length: self.domain_length,
            burn_in,
        })
    }
}

/// Snapshots of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `frames[t]` is the grid state at snapshot `t`.
    pub frames: Vec<Vec<f64>>,
    pub dt: f64,
    /// Solver steps between snapshots.
    pub save_every: usize,
    pub domain_length: f64,
    /// Solver steps taken before the first snapshot.
    pub burn_in: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Integrates `u0` for `steps` steps of size `dt`, keeping every state. The domain length
/// is `weight * N` of the grid function.
pub fn simulate_ks(u0: &GridFunction<f64>, steps: usize, dt: f64) -> Result<Trajectory> {
    let n = u0.len();
    let solver = KsSolver::new(n, u0.weight() * n as f64, dt)?;
    solver.run(u0.values(), 0, 1, steps + 1)
}
