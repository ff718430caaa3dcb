//! Proper scoring rules and verification metrics.
//!
//! Plain functions evaluate finished ensembles; [`energy_score_on_tape`] records the
//! same estimator for training.

pub mod crps;
pub mod energy;
pub mod grid;
pub mod measure;
pub mod metrics;

pub use crps::{crps_ensemble, empirical_cdf_quantile, empirical_quantile, quantile_score, CrpsKind};
pub use energy::{energy_score_estimator, energy_score_on_tape};
pub use grid::{GridFunction, PredictiveEnsemble};
pub use measure::{
    energy_score_population, expected_energy_score, induced_kernel, kernel_score_induced,
    propriety_gap, DiscreteMeasure,
};
pub use metrics::{
    coverage_and_width, crps_field, ensemble_nll, ensemble_variance, gaussian_nll, l2_metric,
    relative_l2_metric, NllValue, NLL_VARIANCE_FLOOR,
};
