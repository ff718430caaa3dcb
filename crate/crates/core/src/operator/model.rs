use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{spectrum_len, validate_len};
use crate::operator::dropout::{check_rate, fourier_dropout_mask, mode_mask_tensor, weight_dropout_mask};
use crate::scalar::Scalar;
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

/// Added to `softplus(pre_std)` so the predicted standard deviation stays positive.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// One projection producing the output values.
    Deterministic,
    /// Two projections producing a pointwise Gaussian `(mean, std)`.
    Reparam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub width: usize,
    /// Retained Fourier modes per spectral layer.
    pub modes: usize,
    pub layers: usize,
    pub head: HeadKind,
    pub weight_dropout: f64,
    pub fourier_dropout: f64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("in_channels", self.in_channels),
            ("out_channels", self.out_channels),
            ("width", self.width),
            ("modes", self.modes),
            ("layers", self.layers),
        ] {
            if v == 0 {
                return Err(Error::config(format!("model {name} must be positive")));
            }
        }
        check_rate(self.weight_dropout, "weight")?;
        check_rate(self.fourier_dropout, "Fourier")
    }

    pub fn has_dropout(&self) -> bool {
        self.weight_dropout > 0.0 || self.fourier_dropout > 0.0
    }
}

/// Whether dropout is active during a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Train,
    Eval,
}

/// One Fourier layer: `v -> F^-1(R . F(v)) + W v + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLayer<T> {
    /// Complex `(K, C_in, C_out)`.
    pub spectral: Tensor<T>,
    /// Real `(C_in, C_out)`.
    pub pointwise: Tensor<T>,
    /// Real `(C_out)`.
    pub bias: Tensor<T>,
}

struct LayerNodes {
    spectral: NodeId,
    pointwise: NodeId,
    bias: NodeId,
}

fn spectral_block<T: Scalar>(
    tape: &mut Tape<T>,
    layer: &LayerNodes,
    h: NodeId,
    mode_mask: Option<&[T]>,
    activate: bool,
) -> Result<NodeId> {
    let shape = tape.value(h).shape().to_vec();
    if shape.len() != 2 {
        return Err(Error::config(format!("spectral layer input must be (C, N), got {shape:?}")));
    }
    let n = shape[1];
    validate_len(n)?;
    let bins = spectrum_len(n);
    let k = tape.value(layer.spectral).shape()[0];
    if k > bins {
        return Err(Error::config(format!(
            "{k} retained modes exceed the {bins} bins of a {n}-point grid"
        )));
    }
    let spec = tape.fft_real(h)?;
    let low = tape.truncate_modes(spec, k)?;
    let mut mixed = tape.mode_multiply(low, layer.spectral)?;
    if let Some(mask) = mode_mask {
        let rows = tape.value(mixed).shape()[0];
        let m = tape.constant(mode_mask_tensor(rows, mask));
        mixed = tape.mul(mixed, m)?;
    }
    let padded = tape.pad_modes(mixed, bins)?;
    let global = tape.ifft_real(padded, n)?;
    let local = tape.channel_linear(h, layer.pointwise, Some(layer.bias))?;
    let out = tape.add(global, local)?;
    if activate {
        tape.gelu(out)
    } else {
        Ok(out)
    }
}

impl<T: Scalar> SpectralLayer<T> {
    pub fn retained_modes(&self) -> usize {
        self.spectral.shape()[0]
    }

    /// Plain forward pass on `(C_in, N)`; `mode_mask` holds one factor per retained mode.
    pub fn forward(&self, v: &Tensor<T>, mode_mask: Option<&[T]>, activate: bool) -> Result<Tensor<T>> {
        if let Some(m) = mode_mask {
            if m.len() != self.retained_modes() {
                return Err(Error::config("mode mask length differs from retained modes"));
            }
        }
        let mut tape = Tape::new();
        let nodes = LayerNodes {
            spectral: tape.constant(self.spectral.clone()),
            pointwise: tape.constant(self.pointwise.clone()),
            bias: tape.constant(self.bias.clone()),
        };
        let x = tape.constant(v.clone());
        let y = spectral_block(&mut tape, &nodes, x, mode_mask, activate)?;
        Ok(tape.value(y).clone())
    }
}

/// Output of the projection head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadOutput {
    Values(NodeId),
    Gaussian { mean: NodeId, std: NodeId },
}

/// Tape nodes of every parameter, in [`OperatorModel::named_params`] order.
#[derive(Debug, Clone)]
pub struct BoundParams {
    ids: Vec<NodeId>,
}

impl BoundParams {
    /// Wraps nodes already holding the parameters, in `named_params` order.
    pub fn from_ids(ids: Vec<NodeId>) -> Self {
        Self { ids }
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }
}

/// Lifting, a stack of spectral layers and a projection head.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorModel<T> {
    config: ModelConfig,
    lift_weight: Tensor<T>,
    lift_bias: Tensor<T>,
    layers: Vec<SpectralLayer<T>>,
    proj_weight: Tensor<T>,
    proj_bias: Tensor<T>,
    std_weight: Option<Tensor<T>>,
    std_bias: Option<Tensor<T>>,
}

fn uniform_tensor<T: Scalar>(shape: Vec<usize>, bound: f64, rng: &mut dyn RngCore) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::lit(rng.random_range(-bound..=bound))).collect();
    Tensor::from_vec(shape, data).expect("layout is consistent")
}

impl<T: Scalar> OperatorModel<T> {
    /// Randomly initialized model: spectral weights uniform on `[0, 1)` in both parts
    /// scaled by `1 / (C_in C_out)`, pointwise maps and biases uniform `+-1/sqrt(C_in)`.
    pub fn new(config: ModelConfig, rng: &mut dyn RngCore) -> Result<Self> {
        config.validate()?;
        let (w, k) = (config.width, config.modes);
        let lift = 1.0 / (config.in_channels as f64).sqrt();
        let hidden = 1.0 / (w as f64).sqrt();
        let lift_weight = uniform_tensor(vec![config.in_channels, w], lift, rng);
        let lift_bias = uniform_tensor(vec![w], lift, rng);
        let mut layers = Vec::with_capacity(config.layers);
        for _ in 0..config.layers {
            let scale = 1.0 / (w * w) as f64;
            let data = (0..2 * k * w * w)
                .map(|_| T::lit(scale * rng.random::<f64>()))
                .collect();
            layers.push(SpectralLayer {
                spectral: Tensor::complex_from_interleaved(vec![k, w, w], data)?,
                pointwise: uniform_tensor(vec![w, w], hidden, rng),
                bias: uniform_tensor(vec![w], hidden, rng),
            });
        }
        let cu = config.out_channels;
        let proj_weight = uniform_tensor(vec![w, cu], hidden, rng);
        let proj_bias = uniform_tensor(vec![cu], hidden, rng);
        let (std_weight, std_bias) = match config.head {
            HeadKind::Reparam => (
                Some(uniform_tensor(vec![w, cu], hidden, rng)),
                Some(uniform_tensor(vec![cu], hidden, rng)),
            ),
            HeadKind::Deterministic => (None, None),
        };
        Ok(Self {
            config,
            lift_weight,
            lift_bias,
            layers,
            proj_weight,
            proj_bias,
            std_weight,
            std_bias,
        })
    }

    /// Model with every weight and bias zero.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        let mut m = Self::new(config, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0))?;
        for p in m.params_mut() {
            p.data_mut().fill(T::zero());
        }
        Ok(m)
    }

    /// Builds a model from named tensors, checking every name and shape.
    pub fn from_named(config: ModelConfig, tensors: Vec<(String, Tensor<T>)>) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let expected: Vec<(String, Vec<usize>, bool)> = model
            .named_params()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec(), t.is_complex()))
            .collect();
        if tensors.len() != expected.len() {
            return Err(Error::config(format!(
                "expected {} parameter tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for ((slot, (name, shape, complex)), (got_name, t)) in
            model.params_mut().into_iter().zip(&expected).zip(tensors)
        {
            if &got_name != name {
                return Err(Error::config(format!("expected parameter `{name}`, got `{got_name}`")));
            }
            t.expect_layout(shape, *complex, name)?;
            *slot = t;
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[SpectralLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [SpectralLayer<T>] {
        &mut self.layers
    }

    /// Sets both dropout rates (used to switch sampling behaviour after training).
    pub fn set_dropout(&mut self, weight: f64, fourier: f64) -> Result<()> {
        check_rate(weight, "weight")?;
        check_rate(fourier, "Fourier")?;
        self.config.weight_dropout = weight;
        self.config.fourier_dropout = fourier;
        Ok(())
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![
            ("lift.weight".to_string(), &self.lift_weight),
            ("lift.bias".to_string(), &self.lift_bias),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layers.{i}.spectral"), &l.spectral));
            out.push((format!("layers.{i}.pointwise"), &l.pointwise));
            out.push((format!("layers.{i}.bias"), &l.bias));
        }
        out.push(("proj.weight".to_string(), &self.proj_weight));
        out.push(("proj.bias".to_string(), &self.proj_bias));
        if let (Some(w), Some(b)) = (&self.std_weight, &self.std_bias) {
            out.push(("std.weight".to_string(), w));
            out.push(("std.bias".to_string(), b));
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = vec![&mut self.lift_weight, &mut self.lift_bias];
        for l in &mut self.layers {
            out.push(&mut l.spectral);
            out.push(&mut l.pointwise);
            out.push(&mut l.bias);
        }
        out.push(&mut self.proj_weight);
        out.push(&mut self.proj_bias);
        if let (Some(w), Some(b)) = (&mut self.std_weight, &mut self.std_bias) {
            out.push(w);
            out.push(b);
        }
        out
    }

    /// Total number of stored scalars across parameters.
    pub fn num_scalars(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.data().len()).sum()
    }

    /// Places every parameter on `tape`, as differentiable leaves when `trainable`.
    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> BoundParams {
        let ids = self
            .named_params()
            .into_iter()
            .map(|(_, t)| tape.leaf(t.clone(), trainable))
            .collect();
        BoundParams { ids }
    }

    /// Records lifting, spectral layers and head for input `a` of shape `(C_a, N)`.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape<T>,
        bound: &BoundParams,
        a: NodeId,
        mode: ForwardMode,
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<HeadOutput> {
        let cfg = &self.config;
        let train = mode == ForwardMode::Train;
        if train && (cfg.has_dropout() || cfg.head == HeadKind::Reparam) && rng.is_none() {
            return Err(Error::config(
                "a random number generator is required for a stochastic forward pass",
            ));
        }
        let input_shape = tape.value(a).shape().to_vec();
        if input_shape.len() != 2 || input_shape[0] != cfg.in_channels {
            return Err(Error::config(format!(
                "model expects input ({}, N), got {input_shape:?}",
                cfg.in_channels
            )));
        }
        let ids = &bound.ids;
        let mut h = tape.channel_linear(a, ids[0], Some(ids[1]))?;
        for i in 0..cfg.layers {
            let nodes = LayerNodes {
                spectral: ids[2 + 3 * i],
                pointwise: ids[3 + 3 * i],
                bias: ids[4 + 3 * i],
            };
            let mask = match (&mut rng, train && cfg.fourier_dropout > 0.0) {
                (Some(r), true) => Some(fourier_dropout_mask::<T>(cfg.modes, cfg.fourier_dropout, &mut **r)?),
                _ => None,
            };
            h = spectral_block(tape, &nodes, h, mask.as_deref(), i + 1 < cfg.layers)?;
            if let (Some(r), true) = (&mut rng, train && cfg.weight_dropout > 0.0) {
                let shape = tape.value(h).shape().to_vec();
                let numel = shape.iter().product();
                let mask = weight_dropout_mask::<T>(numel, cfg.weight_dropout, &mut **r)?;
                let m = tape.constant(Tensor::from_vec(shape, mask)?);
                h = tape.mul(h, m)?;
            }
        }
        let p = 2 + 3 * cfg.layers;
        let values = tape.channel_linear(h, ids[p], Some(ids[p + 1]))?;
        match cfg.head {
            HeadKind::Deterministic => Ok(HeadOutput::Values(values)),
            HeadKind::Reparam => {
                let pre = tape.channel_linear(h, ids[p + 2], Some(ids[p + 3]))?;
                let sp = tape.softplus(pre)?;
                let floor = tape.constant(Tensor::full(tape.value(sp).shape().to_vec(), T::lit(STD_FLOOR)));
                let std = tape.add(sp, floor)?;
                Ok(HeadOutput::Gaussian { mean: values, std })
            }
        }
    }

    /// Plain forward pass; returns `[values]` or `[mean, std]`.
    pub fn forward(&self, a: &Tensor<T>, mode: ForwardMode, rng: Option<&mut dyn RngCore>) -> Result<Vec<Tensor<T>>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let x = tape.constant(a.clone());
        Ok(match self.forward_on_tape(&mut tape, &bound, x, mode, rng)? {
            HeadOutput::Values(v) => vec![tape.value(v).clone()],
            HeadOutput::Gaussian { mean, std } => vec![tape.value(mean).clone(), tape.value(std).clone()],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn config(head: HeadKind, pw: f64, pf: f64) -> ModelConfig {
        ModelConfig {
            in_channels: 2,
            out_channels: 1,
            width: 4,
            modes: 4,
            layers: 2,
            head,
            weight_dropout: pw,
            fourier_dropout: pf,
        }
    }

    fn input(n: usize) -> Tensor<f64> {
        let data = (0..2 * n).map(|i| (i as f64 * 0.37).sin()).collect();
        Tensor::from_vec(vec![2, n], data).unwrap()
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = OperatorModel::<f64>::zeros(config(HeadKind::Deterministic, 0.0, 0.0)).unwrap();
        let out = m.forward(&input(16), ForwardMode::Eval, None).unwrap();
        assert!(out[0].data().iter().all(|&v| v == 0.0));
        assert_eq!(out[0].shape(), &[1, 16]);
    }

    #[test]
    fn no_dropout_ignores_rng() {
        let mut init = ChaCha8Rng::seed_from_u64(0);
        let m = OperatorModel::<f64>::new(config(HeadKind::Deterministic, 0.0, 0.0), &mut init).unwrap();
        let a = m.forward(&input(16), ForwardMode::Train, Some(&mut ChaCha8Rng::seed_from_u64(1))).unwrap();
        let b = m.forward(&input(16), ForwardMode::Train, Some(&mut ChaCha8Rng::seed_from_u64(2))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seeded_dropout_is_reproducible() {
        let mut init = ChaCha8Rng::seed_from_u64(0);
        let m = OperatorModel::<f64>::new(config(HeadKind::Deterministic, 0.2, 0.2), &mut init).unwrap();
        let a = m.forward(&input(16), ForwardMode::Train, Some(&mut ChaCha8Rng::seed_from_u64(9))).unwrap();
        let b = m.forward(&input(16), ForwardMode::Train, Some(&mut ChaCha8Rng::seed_from_u64(9))).unwrap();
        let c = m.forward(&input(16), ForwardMode::Train, Some(&mut ChaCha8Rng::seed_from_u64(10))).unwrap();
        assert_eq!(a[0].data(), b[0].data());
        assert_ne!(a[0].data(), c[0].data());
    }

    #[test]
    fn stochastic_pass_without_rng_is_rejected() {
        let m = OperatorModel::<f64>::zeros(config(HeadKind::Deterministic, 0.1, 0.0)).unwrap();
        assert!(matches!(
            m.forward(&input(16), ForwardMode::Train, None),
            Err(Error::Config(_))
        ));
        assert!(m.forward(&input(16), ForwardMode::Eval, None).is_ok());
    }

    #[test]
    fn reparam_head_yields_positive_std() {
        let mut init = ChaCha8Rng::seed_from_u64(4);
        let m = OperatorModel::<f64>::new(config(HeadKind::Reparam, 0.0, 0.0), &mut init).unwrap();
        let out = m.forward(&input(32), ForwardMode::Eval, None).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out[1].data().iter().all(|&s| s >= STD_FLOOR));
    }

    #[test]
    fn named_roundtrip_restores_model() {
        let mut init = ChaCha8Rng::seed_from_u64(2);
        let m = OperatorModel::<f64>::new(config(HeadKind::Reparam, 0.0, 0.1), &mut init).unwrap();
        let named = m.named_params().into_iter().map(|(n, t)| (n, t.clone())).collect();
        assert_eq!(OperatorModel::from_named(m.config().clone(), named).unwrap(), m);
    }

    #[test]
    fn too_many_modes_for_grid_is_rejected() {
        let mut cfg = config(HeadKind::Deterministic, 0.0, 0.0);
        cfg.modes = 6;
        let m = OperatorModel::<f64>::zeros(cfg).unwrap();
        assert!(matches!(m.forward(&input(8), ForwardMode::Eval, None), Err(Error::Config(_))));
    }
}
