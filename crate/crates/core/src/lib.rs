//! Probabilistic spectral neural operators trained with the energy score.
//!
//! The math core ([`tensor`], [`fft`], [`tape`], [`scoring`], [`operator`], [`training`])
//! is generic over [`Scalar`]; the aliases below fix it to `f64`, which is what the data
//! pipeline, file formats and command-line tools use.

// Negated comparisons are used on purpose so that NaN fails validation checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod fft;
pub mod gradcheck;
pub mod operator;
pub mod propriety;
pub mod scalar;
pub mod scoring;
pub mod tape;
pub mod training;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tape::{Gradients, NodeId, Op, Primitive, Tape};
pub use tensor::Tensor;

pub type Tensor64 = Tensor<f64>;
pub type Tape64 = Tape<f64>;
pub type GridFunction64 = scoring::GridFunction<f64>;
pub type Ensemble64 = scoring::PredictiveEnsemble<f64>;
pub type DiscreteMeasure64 = scoring::DiscreteMeasure<f64>;
