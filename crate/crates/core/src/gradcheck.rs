//! Central finite-difference checks of the tape gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::operator::{BoundParams, HeadKind, ModelConfig, OperatorModel};
use crate::tape::{NodeId, Primitive, Tape};
use crate::tensor::Tensor;
use crate::training::{loss_l2, loss_pno, Method};

pub const FD_STEP: f64 = 1e-6;
pub const PRIMITIVE_TOLERANCE: f64 = 1e-5;
pub const END_TO_END_TOLERANCE: f64 = 1e-4;

/// Maximum relative error of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub name: String,
    pub rel_err: f64,
    pub tolerance: f64,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.rel_err < self.tolerance
    }
}

/// `max |analytic - fd| / max(|fd|_inf, 1e-12)` over every scalar of every gradient.
pub fn relative_error(analytic: &[f64], fd: &[f64]) -> f64 {
    let diff = analytic.iter().zip(fd).map(|(a, f)| (a - f).abs()).fold(0.0, f64::max);
    let scale = fd.iter().map(|f| f.abs()).fold(0.0, f64::max).max(1e-12);
    diff / scale
}

/// Compares tape gradients of `build` against central differences in every stored scalar
/// of `inputs`. `build` receives the input nodes and must return a scalar node.
pub fn check_function<F>(inputs: &[Tensor<f64>], build: F) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[NodeId]) -> Result<NodeId>,
{
    let eval = |xs: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = xs.iter().map(|x| tape.param(x.clone())).collect();
        let root = build(&mut tape, &ids)?;
        tape.value(root).item()
    };
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs.iter().map(|x| tape.param(x.clone())).collect();
    let root = build(&mut tape, &ids)?;
    let grads = tape.backward(root)?;
    let mut analytic = Vec::new();
    let mut fd = Vec::new();
    let mut work = inputs.to_vec();
    for (i, id) in ids.iter().enumerate() {
        analytic.extend_from_slice(grads.get_or_zeros(*id, &inputs[i]).data());
        for j in 0..inputs[i].data().len() {
            let x0 = inputs[i].data()[j];
            work[i].data_mut()[j] = x0 + FD_STEP;
            let up = eval(&work)?;
            work[i].data_mut()[j] = x0 - FD_STEP;
            let down = eval(&work)?;
            work[i].data_mut()[j] = x0;
            fd.push((up - down) / (2.0 * FD_STEP));
        }
    }
    Ok(relative_error(&analytic, &fd))
}

fn uniform(rng: &mut ChaCha8Rng, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).expect("shape matches")
}

fn complex(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::complex_from_interleaved(shape, (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .expect("shape matches")
}

/// Reduces any node to a scalar: `norm` for complex values, `sum(y * c)` for real ones.
fn to_scalar(tape: &mut Tape<f64>, y: NodeId, c: &Tensor<f64>) -> Result<NodeId> {
    if tape.value(y).is_complex() {
        return tape.norm(y, 1.0);
    }
    let c = tape.constant(c.clone());
    let p = tape.mul(y, c)?;
    tape.sum(p)
}

fn check_op<F>(rng: &mut ChaCha8Rng, inputs: Vec<Tensor<f64>>, op: F) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[NodeId]) -> Result<NodeId>,
{
    // Probe the output layout once to draw the contraction weights.
    let mut probe = Tape::new();
    let ids: Vec<NodeId> = inputs.iter().map(|x| probe.constant(x.clone())).collect();
    let out = op(&mut probe, &ids)?;
    let shape = probe.value(out).shape().to_vec();
    let c = uniform(rng, shape, -1.0, 1.0);
    check_function(&inputs, |tape, ids| {
        let y = op(tape, ids)?;
        to_scalar(tape, y, &c)
    })
}

/// One relative error per entry of [`Primitive::ALL`], in that order.
pub fn check_primitives(seed: u64) -> Result<Vec<(Primitive, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut rng;
    let mut out = Vec::with_capacity(Primitive::ALL.len());
    for p in Primitive::ALL {
        let err = match p {
            Primitive::Add => {
                let xs = vec![uniform(r, vec![3, 8], -1.0, 1.0), uniform(r, vec![3, 8], -1.0, 1.0)];
                check_op(r, xs, |t, i| t.add(i[0], i[1]))?
            }
            Primitive::Subtract => {
                let xs = vec![uniform(r, vec![3, 8], -1.0, 1.0), uniform(r, vec![3, 8], -1.0, 1.0)];
                check_op(r, xs, |t, i| t.sub(i[0], i[1]))?
            }
            Primitive::Multiply => {
                let xs = vec![uniform(r, vec![3, 8], -1.0, 1.0), uniform(r, vec![3, 8], -1.0, 1.0)];
                let real = check_op(r, xs, |t, i| t.mul(i[0], i[1]))?;
                let zs = vec![complex(r, vec![2, 5]), complex(r, vec![2, 5])];
                real.max(check_op(r, zs, |t, i| t.mul(i[0], i[1]))?)
            }
            Primitive::ChannelLinear => {
                let xs = vec![
                    uniform(r, vec![3, 8], -1.0, 1.0),
                    uniform(r, vec![3, 2], -1.0, 1.0),
                    uniform(r, vec![2], -1.0, 1.0),
                ];
                check_op(r, xs, |t, i| t.channel_linear(i[0], i[1], Some(i[2])))?
            }
            Primitive::ModeMultiply => {
                let xs = vec![complex(r, vec![3, 4]), complex(r, vec![4, 3, 2])];
                check_op(r, xs, |t, i| t.mode_multiply(i[0], i[1]))?
            }
            Primitive::FftReal => {
                let xs = vec![uniform(r, vec![2, 16], -1.0, 1.0)];
                check_op(r, xs, |t, i| t.fft_real(i[0]))?
            }
            Primitive::IfftReal => {
                let xs = vec![complex(r, vec![2, 9])];
                check_op(r, xs, |t, i| t.ifft_real(i[0], 16))?
            }
            Primitive::Gelu => {
                let xs = vec![uniform(r, vec![3, 8], -3.0, 3.0)];
                check_op(r, xs, |t, i| t.gelu(i[0]))?
            }
            Primitive::TruncateModes => {
                let xs = vec![complex(r, vec![2, 9])];
                check_op(r, xs, |t, i| t.truncate_modes(i[0], 4))?
            }
            Primitive::PadModes => {
                let xs = vec![complex(r, vec![2, 4])];
                check_op(r, xs, |t, i| t.pad_modes(i[0], 9))?
            }
            Primitive::ReduceSum => {
                let xs = vec![uniform(r, vec![3, 8], -1.0, 1.0)];
                check_op(r, xs, |t, i| t.sum(i[0]))?
            }
            Primitive::Sqrt => {
                let xs = vec![uniform(r, vec![3, 8], 0.5, 2.0)];
                check_op(r, xs, |t, i| t.sqrt(i[0]))?
            }
            Primitive::Norm => {
                let xs = vec![uniform(r, vec![3, 8], -1.0, 1.0)];
                let real = check_op(r, xs, |t, i| t.norm(i[0], 0.3))?;
                let zs = vec![complex(r, vec![2, 5])];
                real.max(check_op(r, zs, |t, i| {
                    let n = t.norm(i[0], 0.7)?;
                    t.scale(n, 1.0)
                })?)
            }
            Primitive::Softplus => {
                let xs = vec![uniform(r, vec![3, 8], -3.0, 3.0)];
                check_op(r, xs, |t, i| t.softplus(i[0]))?
            }
            Primitive::Scale => {
                let xs = vec![uniform(r, vec![3, 8], -1.0, 1.0)];
                check_op(r, xs, |t, i| t.scale(i[0], 1.7))?
            }
        };
        out.push((p, err));
    }
    Ok(out)
}

/// Model used by the end-to-end check: width 4, 4 modes, 16 grid points.
pub fn tiny_model_config(method: Method) -> ModelConfig {
    let (head, pw, pf) = match method {
        Method::PnoR => (HeadKind::Reparam, 0.0, 0.0),
        Method::PnoD | Method::Mcd => (HeadKind::Deterministic, 0.1, 0.1),
    };
    ModelConfig {
        in_channels: 1,
        out_channels: 1,
        width: 4,
        modes: 4,
        layers: 2,
        head,
        weight_dropout: pw,
        fourier_dropout: pf,
    }
}

pub const TINY_GRID: usize = 16;
pub const TINY_MEMBERS: usize = 3;

/// Relative error of the full training loss gradient (energy score with `M = 3` for the
/// probabilistic methods, L2 for MC dropout) with respect to every model parameter. The
/// random stream is reseeded before each evaluation so masks and noise stay fixed.
pub fn check_end_to_end(seed: u64, method: Method) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = OperatorModel::<f64>::new(tiny_model_config(method), &mut rng)?;
    let inputs: Vec<Tensor<f64>> = (0..2).map(|_| uniform(&mut rng, vec![1, TINY_GRID], -1.0, 1.0)).collect();
    let targets: Vec<Tensor<f64>> = (0..2).map(|_| uniform(&mut rng, vec![1, TINY_GRID], -1.0, 1.0)).collect();
    let noise_seed: u64 = rng.random();
    let weight = 1.0 / TINY_GRID as f64;
    let params: Vec<Tensor<f64>> = model.named_params().into_iter().map(|(_, t)| t.clone()).collect();
    check_function(&params, |tape, ids| {
        let bound = BoundParams::from_ids(ids.to_vec());
        let a: Vec<&Tensor<f64>> = inputs.iter().collect();
        let u: Vec<&Tensor<f64>> = targets.iter().collect();
        let mut noise = ChaCha8Rng::seed_from_u64(noise_seed);
        if method.uses_energy_score() {
            loss_pno(tape, &model, &bound, &a, &u, method.sampler(), TINY_MEMBERS, weight, &mut noise)
        } else {
            loss_l2(tape, &model, &bound, &a, &u, weight, Some(&mut noise))
        }
    })
}

/// Every primitive and every method's end-to-end loss for one seed.
pub fn run_suite(seed: u64) -> Result<Vec<GradReport>> {
    let mut out: Vec<GradReport> = check_primitives(seed)?
        .into_iter()
        .map(|(p, e)| GradReport {
            name: p.name().to_string(),
            rel_err: e,
            tolerance: PRIMITIVE_TOLERANCE,
        })
        .collect();
    for method in Method::ALL {
        out.push(GradReport {
            name: format!("end_to_end_{}", method.name()),
            rel_err: check_end_to_end(seed, method)?,
            tolerance: END_TO_END_TOLERANCE,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_primitive_is_reported_once() {
        let r = check_primitives(0).unwrap();
        assert_eq!(r.iter().map(|(p, _)| *p).collect::<Vec<_>>(), Primitive::ALL.to_vec());
        for (p, e) in r {
            assert!(e < PRIMITIVE_TOLERANCE, "{p}: {e}");
        }
    }

    #[test]
    fn spectral_energy_gradient_in_complex_weights() {
        // |ifft(w . fft(x))|^2 as a function of the complex multiplier w.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = uniform(&mut rng, vec![1, 8], -1.0, 1.0);
        let w = complex(&mut rng, vec![1, 5]);
        let err = check_function(&[w], |t, ids| {
            let xc = t.constant(x.clone());
            let f = t.fft_real(xc)?;
            let p = t.mul(f, ids[0])?;
            let y = t.ifft_real(p, 8)?;
            let n = t.norm(y, 1.0)?;
            t.mul(n, n)
        })
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn end_to_end_losses_match() {
        for method in Method::ALL {
            let e = check_end_to_end(1, method).unwrap();
            assert!(e < END_TO_END_TOLERANCE, "{method}: {e}");
        }
    }

    #[test]
    fn relative_error_of_identical_vectors_is_zero() {
        assert_eq!(relative_error(&[1.0, -2.0], &[1.0, -2.0]), 0.0);
    }
}
