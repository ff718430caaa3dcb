use pno_core::data::{
    decode_tensor, encode_tensor, gaussian_functional_benchmark, generate, DataConfig, Dataset,
};
use pno_core::Tensor;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn tensor_encoding_roundtrips_bitwise(
        data in prop::collection::vec(any::<f64>(), 1..64),
        complex in any::<bool>(),
    ) {
        let t = if complex && data.len() % 2 == 0 {
            Tensor::complex_from_interleaved(vec![data.len() / 2], data.clone()).unwrap()
        } else {
            Tensor::from_vec(vec![data.len()], data.clone()).unwrap()
        };
        let bytes = encode_tensor(&t).unwrap();
        let back = decode_tensor(&bytes).unwrap();
        prop_assert_eq!(back.shape(), t.shape());
        prop_assert_eq!(back.is_complex(), t.is_complex());
        prop_assert!(back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(encode_tensor(&back).unwrap(), bytes);
    }
}

#[test]
fn benchmark_noise_and_mean_are_recoverable() {
    let sigma = 0.3;
    let draws = gaussian_functional_benchmark(400, 64, 8, sigma, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
    let residuals: Vec<f64> = draws
        .iter()
        .flat_map(|(_, mean, u)| u.iter().zip(mean).map(|(u, m)| u - m))
        .collect();
    let n = residuals.len() as f64;
    let mu = residuals.iter().sum::<f64>() / n;
    let var = residuals.iter().map(|r| (r - mu).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mu.abs() < 4.0 * sigma / n.sqrt());
    assert!((var - sigma * sigma).abs() < 0.05 * sigma * sigma, "{var}");
}

#[test]
fn dataset_directory_roundtrips() {
    let cfg = DataConfig::from_json(r#"{"generator": "gaussian", "samples": 40, "grid_points": 32, "k_smooth": 8}"#).unwrap();
    let ds = generate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    ds.save_dir(dir.path(), cfg.generator_json(), cfg.seed).unwrap();
    let (back, manifest) = Dataset::load_dir(dir.path()).unwrap();
    assert_eq!(back, ds);
    assert_eq!(manifest, ds.manifest(cfg.generator_json(), cfg.seed));
}

#[test]
fn normalization_uses_only_training_rows() {
    let cfg = DataConfig::from_json(r#"{"generator": "gaussian", "samples": 100, "grid_points": 32, "k_smooth": 8}"#).unwrap();
    let ds = generate(&cfg).unwrap();
    let train = ds.samples::<f64>(ds.split.train_range());
    let values: Vec<f64> = train.targets.iter().flat_map(|t| t.data().to_vec()).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 1e-12);
    assert!((var - 1.0).abs() < 1e-12);
    let all = ds.samples::<f64>(0..ds.len());
    let all_mean = all.targets.iter().flat_map(|t| t.data().to_vec()).sum::<f64>() / (ds.len() * 32) as f64;
    assert!(all_mean.abs() > 1e-6);
}
