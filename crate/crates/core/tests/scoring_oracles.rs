use pno_core::propriety::random_measure;
use pno_core::scoring::{
    coverage_and_width, crps_ensemble, crps_field, empirical_cdf_quantile, energy_score_estimator,
    energy_score_population, ensemble_nll, kernel_score_induced, propriety_gap, quantile_score, CrpsKind,
    DiscreteMeasure, GridFunction, PredictiveEnsemble,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

/// Closed-form CRPS of `N(mu, sigma^2)` at `y`.
fn gaussian_crps(mu: f64, sigma: f64, y: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let z = (y - mu) / sigma;
    sigma * (z * (2.0 * n.cdf(z) - 1.0) + 2.0 * n.pdf(z) - 1.0 / std::f64::consts::PI.sqrt())
}

fn ensemble(members: &[Vec<f64>], w: f64) -> PredictiveEnsemble<f64> {
    PredictiveEnsemble::new(members.iter().map(|m| GridFunction::with_weight(m.clone(), w).unwrap()).collect())
        .unwrap()
}

fn members_strategy(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, n), 2..8)
}

proptest! {
    #[test]
    fn scores_are_translation_invariant(
        members in members_strategy(6),
        obs in prop::collection::vec(-5.0..5.0f64, 6),
        c in -10.0..10.0f64,
    ) {
        let w = 1.0 / 6.0;
        let ens = ensemble(&members, w);
        let y = GridFunction::with_weight(obs.clone(), w).unwrap();
        let shifted = ens.shifted(c);
        let ys = y.shifted(c);
        let tol = 1e-10;
        prop_assert!((energy_score_estimator(&ens, &y).unwrap() - energy_score_estimator(&shifted, &ys).unwrap()).abs() < tol);
        prop_assert!((crps_field(&ens, &y, CrpsKind::Fair).unwrap() - crps_field(&shifted, &ys, CrpsKind::Fair).unwrap()).abs() < tol);
        prop_assert!((ensemble_nll(&ens, &y).unwrap().value - ensemble_nll(&shifted, &ys).unwrap().value).abs() < 1e-6);
        let (c0, w0) = coverage_and_width(&ens, &y, 0.05).unwrap();
        let (c1, w1) = coverage_and_width(&shifted, &ys, 0.05).unwrap();
        prop_assert!((w0 - w1).abs() < tol);
        // A point exactly on an interval end may flip under rounding; allow one grid point.
        prop_assert!((c0 - c1).abs() <= 1.0 / 6.0 + 1e-12);
    }

    #[test]
    fn one_point_energy_score_is_fair_crps(xs in prop::collection::vec(-5.0..5.0f64, 2..20), y in -5.0..5.0f64) {
        let members: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let es = energy_score_estimator(&ensemble(&members, 1.0), &GridFunction::with_weight(vec![y], 1.0).unwrap()).unwrap();
        let crps = crps_ensemble(&xs, y, CrpsKind::Fair).unwrap();
        prop_assert!((es - crps).abs() < 1e-12);
    }

    #[test]
    fn kernel_score_matches_energy_score_for_any_anchor(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.random_range(1..=3);
        let p = random_measure(&mut rng, d, 5);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let es = energy_score_population(&p, &x).unwrap();
        for _ in 0..3 {
            let z0: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            prop_assert!((kernel_score_induced(&p, &x, &z0).unwrap() - es).abs() < 1e-12);
        }
    }

    #[test]
    fn expected_score_is_minimized_by_the_truth(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rng.random_range(1..=3);
        let p = random_measure(&mut rng, d, 5);
        let q = random_measure(&mut rng, d, 5);
        prop_assert!(propriety_gap(&p, &q).unwrap() >= -1e-12);
    }
}

fn quantile_integral(xs: &[f64], y: f64, h: usize) -> f64 {
    (0..h)
        .map(|i| {
            let a = (i as f64 + 0.5) / h as f64;
            quantile_score(empirical_cdf_quantile(xs, a).unwrap(), y, a).unwrap()
        })
        .sum::<f64>()
        / h as f64
}

#[test]
fn nrg_crps_is_the_quantile_score_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 10_000;
    for _ in 0..100 {
        let m = rng.random_range(1..=100);
        let xs: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let y = rng.random_range(-0.5..1.5);
        let crps = crps_ensemble(&xs, y, CrpsKind::Nrg).unwrap();
        let integral = quantile_integral(&xs, y, h);
        assert!((crps - integral).abs() < 1e-4, "M = {m}: {crps} vs {integral}");
    }
}

#[test]
fn quadrature_error_is_bounded_by_the_sample_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 2_000;
    for _ in 0..100 {
        let m = rng.random_range(2..=100);
        let scale = rng.random_range(0.1..5.0);
        let xs: Vec<f64> = (0..m).map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect();
        let y: f64 = scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        let range = xs.iter().cloned().fold(f64::MIN, f64::max) - xs.iter().cloned().fold(f64::MAX, f64::min);
        let err = (crps_ensemble(&xs, y, CrpsKind::Nrg).unwrap() - quantile_integral(&xs, y, h)).abs();
        assert!(err <= range / h as f64 + 1e-12, "error {err}, range {range}");
    }
}

#[test]
fn three_member_estimator_is_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let obs = GridFunction::with_weight(vec![0.0], 1.0).unwrap();
    let draws = 100_000;
    let mut acc = 0.0;
    for _ in 0..draws {
        let members: Vec<Vec<f64>> = (0..3).map(|_| vec![StandardNormal.sample(&mut rng)]).collect();
        acc += energy_score_estimator(&ensemble(&members, 1.0), &obs).unwrap();
    }
    let oracle = gaussian_crps(0.0, 1.0, 0.0);
    assert!((oracle - 0.23369).abs() < 1e-5);
    assert!((acc / draws as f64 - oracle).abs() < 0.003);
}

#[test]
fn fair_crps_of_large_gaussian_ensembles_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (mu, sigma, y) in [(0.0, 1.0, 0.0), (1.0, 0.5, 2.0), (-3.0, 2.0, 1.0)] {
        let xs: Vec<f64> = (0..100_000)
            .map(|_| mu + sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let c = crps_ensemble(&xs, y, CrpsKind::Fair).unwrap();
        assert!((c - gaussian_crps(mu, sigma, y)).abs() < 0.01 * sigma, "{c}");
    }
}

#[test]
fn population_score_matches_a_direct_sum() {
    // Direct double sum over all ordered atom pairs, diagonal included.
    let atoms: Vec<Vec<f64>> = vec![vec![0.0], vec![2.0], vec![5.0]];
    let p = DiscreteMeasure::uniform(atoms.clone()).unwrap();
    let x = [1.0];
    let direct = (1.0 + 1.0 + 4.0) / 3.0 - 0.5 * (2.0 * (2.0 + 5.0 + 3.0)) / 9.0;
    assert!((energy_score_population(&p, &x).unwrap() - direct).abs() < 1e-14);
}
