use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operator::OperatorModel;
use crate::scalar::Scalar;
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;
use crate::training::adam::Adam;
use crate::training::clip::clip_gradients;
use crate::training::config::{Method, TrainConfig};
use crate::training::loss::{loss_l2, loss_pno};

/// Independent random streams derived from one seed.
pub mod streams {
    pub const INIT: u64 = 0;
    pub const SHUFFLE: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const VALIDATION: u64 = 3;
    pub const EVALUATION: u64 = 4;
}

/// ChaCha8 generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Normalized `(input, target)` pairs on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples<T> {
    pub inputs: Vec<Tensor<T>>,
    pub targets: Vec<Tensor<T>>,
    /// Quadrature weight per grid point.
    pub weight: T,
}

impl<T: Scalar> Samples<T> {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Freshly initialized model for `config`, drawn from the seed's init stream.
pub fn init_model<T: Scalar>(config: &TrainConfig) -> Result<OperatorModel<T>> {
    config.validate()?;
    OperatorModel::new(config.model_config(), &mut stream_rng(config.seed, streams::INIT))
}

/// Records the method's loss for one batch.
#[allow(clippy::too_many_arguments)]
pub fn batch_loss<T: Scalar>(
    tape: &mut Tape<T>,
    model: &OperatorModel<T>,
    config: &TrainConfig,
    params: &crate::operator::BoundParams,
    inputs: &[&Tensor<T>],
    targets: &[&Tensor<T>],
    weight: T,
    rng: &mut dyn RngCore,
) -> Result<NodeId> {
    match config.method {
        Method::Mcd => loss_l2(tape, model, params, inputs, targets, weight, Some(rng)),
        m => loss_pno(tape, model, params, inputs, targets, m.sampler(), config.m_train, weight, rng),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub learning_rate: f64,
    /// Largest post-clip gradient norm of the epoch.
    pub max_grad_norm: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    /// Global gradient norm after clipping, one entry per optimizer step.
    pub step_grad_norms: Vec<f64>,
}

impl FitReport {
    pub fn epochs_run(&self) -> usize {
        self.history.len()
    }
}

/// Mean loss over `samples` without gradients; stochastic parts use `rng`.
pub fn mean_loss<T: Scalar>(
    model: &OperatorModel<T>,
    config: &TrainConfig,
    samples: &Samples<T>,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::config("cannot evaluate a loss on zero samples"));
    }
    let mut total = 0.0;
    for chunk in (0..samples.len()).collect::<Vec<_>>().chunks(config.batch_size) {
        let mut tape = Tape::new();
        let bound = model.bind(&mut tape, false);
        let inputs: Vec<&Tensor<T>> = chunk.iter().map(|&i| &samples.inputs[i]).collect();
        let targets: Vec<&Tensor<T>> = chunk.iter().map(|&i| &samples.targets[i]).collect();
        let loss = batch_loss(&mut tape, model, config, &bound, &inputs, &targets, samples.weight, rng)?;
        total += tape.value(loss).item()?.as_f64() * chunk.len() as f64;
    }
    Ok(total / samples.len() as f64)
}

pub fn fit<T: Scalar>(
    model: &mut OperatorModel<T>,
    train: &Samples<T>,
    val: &Samples<T>,
    config: &TrainConfig,
) -> Result<FitReport> {
    fit_with(model, train, val, config, &mut |_| {})
}

/// Shuffled mini-batch training with clipping, Adam and early stopping on the validation
/// loss. On return `model` holds the best-validation parameters.
pub fn fit_with<T: Scalar>(
    model: &mut OperatorModel<T>,
    train: &Samples<T>,
    val: &Samples<T>,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<FitReport> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::config("training and validation sets must be non-empty"));
    }
    let mut shuffle = stream_rng(config.seed, streams::SHUFFLE);
    let mut noise = stream_rng(config.seed, streams::NOISE);
    let mut adam = {
        let params: Vec<&Tensor<T>> = model.named_params().into_iter().map(|(_, t)| t).collect();
        Adam::new(&params)
    };
    let clip = T::lit(config.clip_norm);
    let mut lr = config.learning_rate;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (f64::INFINITY, 0usize, model.clone());
    let mut since_best = 0usize;
    let mut since_change = 0usize;
    let mut report = FitReport {
        history: Vec::new(),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        stopped_early: false,
        step_grad_norms: Vec::new(),
    };

    for epoch in 1..=config.max_epochs {
        let start = Instant::now();
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        let mut max_norm = 0.0f64;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut tape = Tape::new();
            let bound = model.bind(&mut tape, true);
            let inputs: Vec<&Tensor<T>> = chunk.iter().map(|&i| &train.inputs[i]).collect();
            let targets: Vec<&Tensor<T>> = chunk.iter().map(|&i| &train.targets[i]).collect();
            let loss = batch_loss(&mut tape, model, config, &bound, &inputs, &targets, train.weight, &mut noise)?;
            let value = tape.value(loss).item()?.as_f64();
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: batch + 1 });
            }
            loss_sum += value * chunk.len() as f64;
            let grads = tape.backward(loss)?;
            let mut g: Vec<Tensor<T>> = {
                let params = model.named_params();
                bound
                    .ids()
                    .iter()
                    .zip(params)
                    .map(|(&id, (_, p))| grads.get_or_zeros(id, p))
                    .collect()
            };
            let post = clip_gradients(&mut g, clip).as_f64();
            report.step_grad_norms.push(post);
            max_norm = max_norm.max(post);
            adam.step(&mut model.params_mut(), &g, T::lit(lr))?;
        }
        let val_loss = mean_loss(model, config, val, &mut stream_rng(config.seed, streams::VALIDATION))?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: 0 });
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_loss,
            learning_rate: lr,
            max_grad_norm: max_norm,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        report.history.push(record);

        if val_loss < best.0 {
            best = (val_loss, epoch, model.clone());
            since_best = 0;
            since_change = 0;
        } else {
            since_best += 1;
            since_change += 1;
            if since_best >= config.patience {
                report.stopped_early = epoch < config.max_epochs;
                break;
            }
            if let Some(p) = config.lr_halving_patience {
                if since_change >= p {
                    lr *= 0.5;
                    since_change = 0;
                }
            }
        }
    }
    report.best_val_loss = best.0;
    report.best_epoch = best.1;
    *model = best.2;
    Ok(report)
}
