use std::f64::consts::PI;

use pno_core::data::{simulate_ks, KsSolver};
use pno_core::fft::fft_real;
use pno_core::GridFunction64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(n: usize, l: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..n).map(|j| f(l * j as f64 / n as f64)).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn spatial_mean_is_conserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u0: Vec<f64> = (0..128).map(|_| rng.random_range(-1.0..1.0)).collect();
    let m0 = mean(&u0);
    let traj = simulate_ks(&GridFunction64::periodic(u0, 100.0).unwrap(), 200, 0.05).unwrap();
    for frame in &traj.frames {
        assert!((mean(frame) - m0).abs() < 1e-8);
    }
}

#[test]
fn small_modes_grow_at_the_linear_rate() {
    let (n, l, dt, steps) = (128, 100.0, 0.05, 100);
    let t = dt * steps as f64;
    for k in [1usize, 3, 8, 12, 15, 18] {
        let q = 2.0 * PI * k as f64 / l;
        let u0 = grid(n, l, |x| 1e-6 * (q * x).cos());
        let traj = simulate_ks(&GridFunction64::periodic(u0.clone(), l).unwrap(), steps, dt).unwrap();
        let a0 = fft_real(&u0).unwrap()[k].norm();
        let a1 = fft_real(traj.frames.last().unwrap()).unwrap()[k].norm();
        let rate = (a1 / a0).ln() / t;
        let expected = q * q - q.powi(4);
        assert!(
            (rate - expected).abs() <= 0.02 * expected.abs(),
            "k = {k}: rate {rate}, expected {expected}"
        );
    }
}

fn kt_final(dt: f64, t: f64) -> Vec<f64> {
    let (n, l) = (128, 32.0 * PI);
    let solver = KsSolver::new(n, l, dt).unwrap();
    let u0 = grid(n, l, |x| (x / 16.0).cos() * (1.0 + (x / 16.0).sin()));
    let steps = (t / dt).round() as usize;
    solver.run(&u0, steps, 1, 1).unwrap().frames.pop().unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn etdrk4_converges_at_fourth_order() {
    let t = 5.0;
    let reference = kt_final(1.0 / 256.0, t);
    let dts = [0.2, 0.1, 0.05];
    let errors: Vec<f64> = dts.iter().map(|&dt| max_diff(&kt_final(dt, t), &reference)).collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 3.5, "errors {errors:?}");
    }
}
