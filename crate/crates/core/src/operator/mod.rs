//! One-dimensional Fourier neural operator with dropout and reparameterized sampling.

pub mod dropout;
pub mod model;
pub mod sampling;

pub use dropout::{
    apply_fourier_dropout, apply_weight_dropout, fourier_dropout_mask, weight_dropout_mask,
};
pub use model::{
    BoundParams, ForwardMode, HeadKind, HeadOutput, ModelConfig, OperatorModel, SpectralLayer,
    STD_FLOOR,
};
pub use sampling::{normal_tensor, sample_ensemble, sample_on_tape, sample_pno_d, sample_pno_r, Sampler};
