//! Drawing predictive ensembles from a model, on a tape or as plain values.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::model::{BoundParams, ForwardMode, HeadKind, HeadOutput, OperatorModel};
use crate::scalar::Scalar;
use crate::scoring::{GridFunction, PredictiveEnsemble};
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

/// How ensemble members are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Independent forward passes with dropout active.
    Dropout,
    /// One pass producing `(mean, std)`, members `mean + std * eps`.
    Reparam,
}

/// Standard-normal tensor of the given shape.
pub fn normal_tensor<T: Scalar>(shape: Vec<usize>, rng: &mut dyn RngCore) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| T::lit(StandardNormal.sample(&mut *rng)))
        .collect();
    Tensor::from_vec(shape, data).expect("layout is consistent")
}

/// Records `m` ensemble members for input node `a`.
pub fn sample_on_tape<T: Scalar>(
    model: &OperatorModel<T>,
    tape: &mut Tape<T>,
    bound: &BoundParams,
    a: NodeId,
    sampler: Sampler,
    m: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<NodeId>> {
    if m == 0 {
        return Err(Error::config("ensemble size must be positive"));
    }
    match sampler {
        Sampler::Dropout => {
            if !model.config().has_dropout() {
                return Err(Error::DegenerateEnsemble(
                    "both dropout rates are zero, so every member would be identical".into(),
                ));
            }
            let mut members = Vec::with_capacity(m);
            for _ in 0..m {
                match model.forward_on_tape(tape, bound, a, ForwardMode::Train, Some(&mut *rng))? {
                    HeadOutput::Values(v) => members.push(v),
                    HeadOutput::Gaussian { mean, .. } => members.push(mean),
                }
            }
            Ok(members)
        }
        Sampler::Reparam => {
            if model.config().head != HeadKind::Reparam {
                return Err(Error::config("reparameterized sampling needs a reparam head"));
            }
            let HeadOutput::Gaussian { mean, std } =
                model.forward_on_tape(tape, bound, a, ForwardMode::Train, Some(&mut *rng))?
            else {
                unreachable!("reparam head yields a Gaussian");
            };
            let shape = tape.value(mean).shape().to_vec();
            let mut members = Vec::with_capacity(m);
            for _ in 0..m {
                let eps = tape.constant(normal_tensor(shape.clone(), rng));
                let noise = tape.mul(std, eps)?;
                members.push(tape.add(mean, noise)?);
            }
            Ok(members)
        }
    }
}

/// Plain-valued ensemble; every `(C_u, N)` member is flattened onto one grid with
/// point weight `weight`.
pub fn sample_ensemble<T: Scalar>(
    model: &OperatorModel<T>,
    a: &Tensor<T>,
    sampler: Sampler,
    m: usize,
    weight: T,
    rng: &mut dyn RngCore,
) -> Result<PredictiveEnsemble<T>> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, false);
    let x = tape.constant(a.clone());
    let ids = sample_on_tape(model, &mut tape, &bound, x, sampler, m, rng)?;
    let members = ids
        .into_iter()
        .map(|id| GridFunction::with_weight(tape.value(id).data().to_vec(), weight))
        .collect::<Result<Vec<_>>>()?;
    PredictiveEnsemble::new(members)
}

/// PNO_D / MCDropout sampling: `m` stochastic passes with dropout active.
pub fn sample_pno_d<T: Scalar>(
    model: &OperatorModel<T>,
    a: &Tensor<T>,
    m: usize,
    weight: T,
    rng: &mut dyn RngCore,
) -> Result<PredictiveEnsemble<T>> {
    sample_ensemble(model, a, Sampler::Dropout, m, weight, rng)
}

/// PNO_R sampling: one pass, `m` Gaussian perturbations of the predicted mean.
pub fn sample_pno_r<T: Scalar>(
    model: &OperatorModel<T>,
    a: &Tensor<T>,
    m: usize,
    weight: T,
    rng: &mut dyn RngCore,
) -> Result<PredictiveEnsemble<T>> {
    sample_ensemble(model, a, Sampler::Reparam, m, weight, rng)
}
