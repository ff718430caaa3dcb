//! Energy-score and L2 training with Adam, gradient clipping and early stopping.

pub mod adam;
pub mod clip;
pub mod config;
pub mod fit;
pub mod loss;

pub use adam::Adam;
pub use clip::{clip_gradients, global_norm};
pub use config::{Method, TrainConfig};
pub use fit::{
    batch_loss, fit, fit_with, init_model, mean_loss, stream_rng, streams, EpochRecord, FitReport,
    Samples,
};
pub use loss::{loss_l2, loss_pno};
