use std::f64::consts::PI;

use pno_core::operator::{sample_pno_r, ForwardMode, HeadKind, ModelConfig, OperatorModel};
use pno_core::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(width: usize, modes: usize, layers: usize, head: HeadKind, pw: f64, pf: f64) -> ModelConfig {
    ModelConfig {
        in_channels: 2,
        out_channels: 1,
        width,
        modes,
        layers,
        head,
        weight_dropout: pw,
        fourier_dropout: pf,
    }
}

/// Channels of random trigonometric polynomials with frequencies below `k`, sampled on a given grid.
fn band_limited(channels: usize, k: usize, seed: u64) -> impl Fn(usize) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64)> = (0..channels * k).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    move |grid: usize| {
        let mut data = Vec::with_capacity(channels * grid);
        for c in 0..channels {
            for j in 0..grid {
                let x = j as f64 / grid as f64;
                let v: f64 = (0..k)
                    .map(|q| {
                        let (a, b) = coeffs[c * k + q];
                        let t = 2.0 * PI * q as f64 * x;
                        a * t.cos() + if q == 0 { 0.0 } else { b * t.sin() }
                    })
                    .sum();
                data.push(v);
            }
        }
        Tensor::from_vec(vec![channels, grid], data).unwrap()
    }
}

/// Naive-DFT projection onto frequencies `0..k`.
fn dft_low_pass(x: &[f64], k: usize) -> Vec<f64> {
    let n = x.len();
    let coeff = |q: usize| -> (f64, f64) {
        x.iter().enumerate().fold((0.0, 0.0), |(re, im), (j, &v)| {
            let t = 2.0 * PI * (q * j) as f64 / n as f64;
            (re + v * t.cos(), im - v * t.sin())
        })
    };
    let cs: Vec<(f64, f64)> = (0..k).map(coeff).collect();
    (0..n)
        .map(|j| {
            cs.iter()
                .enumerate()
                .map(|(q, &(re, im))| {
                    let t = 2.0 * PI * (q * j) as f64 / n as f64;
                    let term = re * t.cos() - im * t.sin();
                    if q == 0 || 2 * q == n { term / n as f64 } else { 2.0 * term / n as f64 }
                })
                .sum()
        })
        .collect()
}

fn projector(modes: usize) -> OperatorModel<f64> {
    let cfg = ModelConfig {
        in_channels: 1,
        out_channels: 1,
        width: 1,
        modes,
        layers: 1,
        head: HeadKind::Deterministic,
        weight_dropout: 0.0,
        fourier_dropout: 0.0,
    };
    let mut m = OperatorModel::<f64>::zeros(cfg).unwrap();
    let params = m.params_mut();
    let [lift_w, _lift_b, spectral, _pointwise, _bias, proj_w, _proj_b] = <[_; 7]>::try_from(params).ok().unwrap();
    lift_w.data_mut()[0] = 1.0;
    proj_w.data_mut()[0] = 1.0;
    for pair in spectral.data_mut().chunks_exact_mut(2) {
        pair[0] = 1.0;
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identity_spectral_layer_is_the_low_pass_projector(
        x in prop::sample::select(vec![16usize, 32, 64]).prop_flat_map(|n| prop::collection::vec(-3.0..3.0f64, n)),
        k in 1usize..8,
    ) {
        let n = x.len();
        let model = projector(k);
        let a = Tensor::from_vec(vec![1, n], x.clone()).unwrap();
        let out = model.forward(&a, ForwardMode::Eval, None).unwrap();
        for (got, want) in out[0].data().iter().zip(dft_low_pass(&x, k)) {
            prop_assert!((got - want).abs() < 1e-10);
        }
    }
}

#[test]
fn single_layer_model_is_resolution_consistent() {
    let modes = 6;
    let mut init = ChaCha8Rng::seed_from_u64(21);
    let model = OperatorModel::<f64>::new(config(8, modes, 1, HeadKind::Reparam, 0.0, 0.0), &mut init).unwrap();
    let input = band_limited(2, modes, 5);
    let coarse = model.forward(&input(32), ForwardMode::Eval, None).unwrap();
    for fine_n in [64, 128] {
        let fine = model.forward(&input(fine_n), ForwardMode::Eval, None).unwrap();
        let stride = fine_n / 32;
        for (c, f) in coarse.iter().zip(&fine) {
            for (j, &v) in c.data().iter().enumerate() {
                assert!((v - f.data()[j * stride]).abs() < 1e-8, "N = {fine_n}, point {j}");
            }
        }
    }
}

#[test]
fn dropout_keeps_the_linear_model_mean() {
    let mut init = ChaCha8Rng::seed_from_u64(8);
    let model = OperatorModel::<f64>::new(config(6, 4, 1, HeadKind::Deterministic, 0.2, 0.2), &mut init).unwrap();
    let a = band_limited(2, 6, 9)(16);
    let clean = model.forward(&a, ForwardMode::Eval, None).unwrap().remove(0);
    let draws = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut sum = [0.0; 16];
    let mut sq = [0.0; 16];
    for _ in 0..draws {
        let y = model.forward(&a, ForwardMode::Train, Some(&mut rng)).unwrap().remove(0);
        for (i, &v) in y.data().iter().enumerate() {
            sum[i] += v;
            sq[i] += v * v;
        }
    }
    for i in 0..16 {
        let mean = sum[i] / draws as f64;
        let var = sq[i] / draws as f64 - mean * mean;
        let se = (var / draws as f64).sqrt();
        assert!((mean - clean.data()[i]).abs() < 5.0 * se + 1e-12, "point {i}: {mean} vs {}", clean.data()[i]);
    }
}

#[test]
fn reparam_ensemble_recovers_mean_and_std() {
    let mut init = ChaCha8Rng::seed_from_u64(2);
    let model = OperatorModel::<f64>::new(config(4, 4, 2, HeadKind::Reparam, 0.0, 0.0), &mut init).unwrap();
    let a = band_limited(2, 4, 3)(16);
    let head = model.forward(&a, ForwardMode::Eval, None).unwrap();
    let (mu, sigma) = (head[0].data(), head[1].data());
    let m = 100_000;
    let ens = sample_pno_r(&model, &a, m, 1.0 / 16.0, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    for i in 0..16 {
        let xs = ens.point_samples(i);
        let mean = xs.iter().sum::<f64>() / m as f64;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
        assert!((mean - mu[i]).abs() < 4.0 * sigma[i] / (m as f64).sqrt(), "point {i}");
        assert!((std - sigma[i]).abs() < 0.05 * sigma[i], "point {i}");
    }
}

#[test]
fn reparam_ensemble_collapses_onto_the_mean_at_the_floor() {
    let mut init = ChaCha8Rng::seed_from_u64(2);
    let mut model = OperatorModel::<f64>::new(config(4, 4, 1, HeadKind::Reparam, 0.0, 0.0), &mut init).unwrap();
    // Zero std weights and a very negative bias drive softplus to zero.
    let mut params = model.params_mut();
    let n = params.len();
    params[n - 2].data_mut().fill(0.0);
    params[n - 1].data_mut().fill(-800.0);
    let a = band_limited(2, 4, 3)(16);
    let mu = model.forward(&a, ForwardMode::Eval, None).unwrap().remove(0);
    let ens = sample_pno_r(&model, &a, 10, 1.0 / 16.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    for member in ens.members() {
        for (x, m) in member.values().iter().zip(mu.data()) {
            assert!((x - m).abs() < 1e-4);
        }
    }
}
