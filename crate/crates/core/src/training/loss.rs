//! Batch losses recorded on a tape.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::operator::{BoundParams, ForwardMode, HeadOutput, OperatorModel, Sampler};
use crate::scalar::Scalar;
use crate::scoring::energy_score_on_tape;
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

fn check_batch<T>(inputs: &[&Tensor<T>], targets: &[&Tensor<T>]) -> Result<()> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::config(format!(
            "batch needs matching non-empty inputs and targets, got {} and {}",
            inputs.len(),
            targets.len()
        )));
    }
    Ok(())
}

fn batch_mean<T: Scalar>(tape: &mut Tape<T>, terms: &[NodeId]) -> Result<NodeId> {
    let total = tape.add_all(terms)?;
    tape.scale(total, T::one() / T::from_usize_lossy(terms.len()))
}

/// Batch mean of the unbiased energy score over `m`-member ensembles.
#[allow(clippy::too_many_arguments)]
pub fn loss_pno<T: Scalar>(
    tape: &mut Tape<T>,
    model: &OperatorModel<T>,
    bound: &BoundParams,
    inputs: &[&Tensor<T>],
    targets: &[&Tensor<T>],
    sampler: Sampler,
    m: usize,
    weight: T,
    rng: &mut dyn RngCore,
) -> Result<NodeId> {
    check_batch(inputs, targets)?;
    if m < 2 {
        return Err(Error::config(format!("energy-score training needs M >= 2 members, got {m}")));
    }
    let mut terms = Vec::with_capacity(inputs.len());
    for (a, u) in inputs.iter().zip(targets) {
        let a = tape.constant((*a).clone());
        let u = tape.constant((*u).clone());
        let members = crate::operator::sample_on_tape(model, tape, bound, a, sampler, m, rng)?;
        terms.push(energy_score_on_tape(tape, &members, u, weight)?);
    }
    batch_mean(tape, &terms)
}

/// Batch mean of `||G(a) - u||`, one forward pass per input with dropout active.
pub fn loss_l2<T: Scalar>(
    tape: &mut Tape<T>,
    model: &OperatorModel<T>,
    bound: &BoundParams,
    inputs: &[&Tensor<T>],
    targets: &[&Tensor<T>],
    weight: T,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<NodeId> {
    check_batch(inputs, targets)?;
    let mut terms = Vec::with_capacity(inputs.len());
    for (a, u) in inputs.iter().zip(targets) {
        let a = tape.constant((*a).clone());
        let u = tape.constant((*u).clone());
        let r: Option<&mut dyn RngCore> = match &mut rng {
            Some(r) => Some(&mut **r),
            None => None,
        };
        let out = match model.forward_on_tape(tape, bound, a, ForwardMode::Train, r)? {
            HeadOutput::Values(v) => v,
            HeadOutput::Gaussian { mean, .. } => mean,
        };
        let diff = tape.sub(out, u)?;
        terms.push(tape.norm(diff, weight)?);
    }
    batch_mean(tape, &terms)
}
