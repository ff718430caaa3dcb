use pno_core::data::{generate, DataConfig, Dataset};
use pno_core::training::{clip_gradients, fit, global_norm, init_model, Method, TrainConfig};
use pno_core::Tensor;
use proptest::prelude::*;

fn gaussian(samples: usize, grid: usize) -> Dataset {
    let json = format!(r#"{{"generator": "gaussian", "seed": 3, "samples": {samples}, "grid_points": {grid}, "k_smooth": 8, "sigma_eta": 0.1}}"#);
    generate(&DataConfig::from_json(&json).unwrap()).unwrap()
}

fn small(method: Method) -> TrainConfig {
    TrainConfig {
        method,
        width: 6,
        modes: 6,
        layers: 2,
        max_epochs: 6,
        patience: 3,
        batch_size: 16,
        weight_dropout: 0.05,
        fourier_dropout: 0.05,
        ..Default::default()
    }
}

fn run(ds: &Dataset, cfg: &TrainConfig) -> (pno_core::operator::OperatorModel<f64>, pno_core::training::FitReport) {
    let mut model = init_model::<f64>(cfg).unwrap();
    let train = ds.samples::<f64>(ds.split.train_range());
    let val = ds.samples::<f64>(ds.split.val_range());
    let report = fit(&mut model, &train, &val, cfg).unwrap();
    (model, report)
}

proptest! {
    #[test]
    fn clipped_norm_never_exceeds_the_bound(
        grads in prop::collection::vec(prop::collection::vec(-1e3..1e3f64, 1..20), 1..5),
        max in 1e-3..10.0f64,
    ) {
        let mut ts: Vec<Tensor<f64>> = grads.iter().map(|g| Tensor::from_vec(vec![g.len()], g.clone()).unwrap()).collect();
        let before = global_norm(&ts);
        let after = clip_gradients(&mut ts, max);
        prop_assert!(after <= max + 1e-12);
        prop_assert!((global_norm(&ts) - after).abs() < 1e-9);
        if before <= max {
            prop_assert_eq!(after, before);
        }
    }
}

#[test]
fn recorded_step_norms_respect_the_clip() {
    let ds = gaussian(80, 32);
    let cfg = TrainConfig {
        clip_norm: 1e-3,
        max_epochs: 2,
        ..small(Method::PnoD)
    };
    let (_, report) = run(&ds, &cfg);
    assert!(!report.step_grad_norms.is_empty());
    assert!(report.step_grad_norms.iter().all(|&g| g <= cfg.clip_norm + 1e-12));
}

#[test]
fn early_stopping_keeps_the_best_epoch() {
    let ds = gaussian(80, 32);
    for method in Method::ALL {
        let cfg = TrainConfig {
            max_epochs: 40,
            patience: 2,
            learning_rate: 0.05,
            ..small(method)
        };
        let (_, report) = run(&ds, &cfg);
        let (best_epoch, best) = report
            .history
            .iter()
            .map(|h| (h.epoch, h.val_loss))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        assert_eq!(report.best_epoch, best_epoch);
        assert_eq!(report.best_val_loss, best);
        if report.stopped_early {
            assert_eq!(report.epochs_run(), best_epoch + cfg.patience);
        } else {
            assert_eq!(report.epochs_run(), cfg.max_epochs);
        }
    }
}

#[test]
fn restored_model_reproduces_the_best_validation_loss() {
    let ds = gaussian(80, 32);
    let cfg = TrainConfig {
        max_epochs: 5,
        ..small(Method::PnoR)
    };
    let (model, report) = run(&ds, &cfg);
    let val = ds.samples::<f64>(ds.split.val_range());
    let mut rng = pno_core::training::stream_rng(cfg.seed, pno_core::training::streams::VALIDATION);
    let loss = pno_core::training::mean_loss(&model, &cfg, &val, &mut rng).unwrap();
    assert_eq!(loss, report.best_val_loss);
}

#[test]
fn equal_seeds_give_identical_parameters() {
    let ds = gaussian(80, 32);
    for method in Method::ALL {
        let cfg = small(method);
        let (a, ra) = run(&ds, &cfg);
        let (b, rb) = run(&ds, &cfg);
        assert_eq!(a, b, "{method:?}");
        let losses = |r: &pno_core::training::FitReport| -> Vec<(u64, u64)> {
            r.history.iter().map(|h| (h.train_loss.to_bits(), h.val_loss.to_bits())).collect()
        };
        assert_eq!(losses(&ra), losses(&rb));
        let (c, _) = run(&ds, &TrainConfig { seed: 1, ..cfg });
        assert_ne!(a, c);
    }
}

#[test]
fn reparam_training_halves_the_energy_score() {
    let ds = gaussian(250, 32);
    let cfg = TrainConfig {
        method: Method::PnoR,
        width: 8,
        modes: 8,
        layers: 2,
        max_epochs: 50,
        patience: 50,
        learning_rate: 5e-3,
        ..Default::default()
    };
    let (_, report) = run(&ds, &cfg);
    assert_eq!(report.epochs_run(), 50);
    let first = report.history[0].train_loss;
    let last = report.history[49].train_loss;
    assert!(last < 0.5 * first, "epoch 1 {first}, epoch 50 {last}");
}
