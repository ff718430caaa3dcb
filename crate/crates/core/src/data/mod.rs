//! Synthetic PDE data, windowed datasets and the on-disk tensor container.

pub mod benchmark;
pub mod checkpoint;
pub mod container;
pub mod dataset;
pub mod generate;
pub mod heat;
pub mod ks;

pub use benchmark::{band_limited_field, gaussian_functional_benchmark, low_pass_halve, optimal_expected_crps};
pub use checkpoint::Checkpoint;
pub use container::{decode_tensor, encode_tensor, load_tensor, save_tensor};
pub use dataset::{make_windows, Dataset, Manifest, NormStats, Split};
pub use generate::{generate, DataConfig, GaussianGenerator, GeneratorConfig, HeatGenerator, KsGenerator};
pub use heat::heat_analytic;
pub use ks::{simulate_ks, KsSolver, Trajectory};
