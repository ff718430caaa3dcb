//! Dataset generators selected by a JSON configuration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::benchmark::gaussian_functional_benchmark;
use crate::data::dataset::{make_windows, Dataset};
use crate::data::heat::heat_pair;
use crate::data::ks::KsSolver;
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::training::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KsGenerator {
    pub trajectories: usize,
    pub grid_points: usize,
    pub domain_length: f64,
    pub dt: f64,
    /// Time between stored frames.
    pub save_interval: f64,
    /// Simulated time discarded before the first frame.
    pub burn_in: f64,
    /// Frames stored per trajectory.
    pub frames: usize,
    pub t_in: usize,
    pub t_out: usize,
    pub stride: usize,
}

impl Default for KsGenerator {
    fn default() -> Self {
        Self {
            trajectories: 25,
            grid_points: 128,
            domain_length: 100.0,
            dt: 0.05,
            save_interval: 2.0,
            burn_in: 50.0,
            frames: 57,
            t_in: 4,
            t_out: 4,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaussianGenerator {
    pub samples: usize,
    pub grid_points: usize,
    pub k_smooth: usize,
    pub sigma_eta: f64,
}

impl Default for GaussianGenerator {
    fn default() -> Self {
        Self {
            samples: 1250,
            grid_points: 128,
            k_smooth: 16,
            sigma_eta: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatGenerator {
    pub samples: usize,
    pub grid_points: usize,
    pub domain_length: f64,
    pub max_mode: usize,
    pub time: f64,
}

impl Default for HeatGenerator {
    fn default() -> Self {
        Self {
            samples: 500,
            grid_points: 64,
            domain_length: 1.0,
            max_mode: 8,
            time: 0.002,
        }
    }
}

/// Which data source to sample, with its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GeneratorConfig {
    Ks(KsGenerator),
    Gaussian(GaussianGenerator),
    Heat(HeatGenerator),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub generator: GeneratorConfig,
}

impl DataConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("invalid data config: {e}")))
    }

    /// Generator name and settings as stored in the manifest.
    pub fn generator_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.generator).expect("config serializes")
    }
}

fn steps(interval: f64, dt: f64, what: &str) -> Result<usize> {
    let s = interval / dt;
    if !(s >= 0.0) || (s - s.round()).abs() > 1e-9 * s.max(1.0) {
        return Err(Error::config(format!("{what} {interval} is not a whole number of steps of {dt}")));
    }
    Ok(s.round() as usize)
}

/// Builds the dataset described by `config`; identical configs give identical data.
pub fn generate(config: &DataConfig) -> Result<Dataset> {
    let mut rng = stream_rng(config.seed, 0);
    match &config.generator {
        GeneratorConfig::Ks(g) => {
            let solver = KsSolver::new(g.grid_points, g.domain_length, g.dt)?;
            let save_every = steps(g.save_interval, g.dt, "save_interval")?;
            let burn_in = steps(g.burn_in, g.dt, "burn_in")?;
            if save_every == 0 {
                return Err(Error::config("save_interval must be positive"));
            }
            let mut trajectories = Vec::with_capacity(g.trajectories);
            for _ in 0..g.trajectories {
                let u0: Vec<f64> = (0..g.grid_points).map(|_| rng.random_range(-1.0..1.0)).collect();
                trajectories.push(solver.run(&u0, burn_in, save_every, g.frames)?);
            }
            let (inputs, targets) = make_windows(&trajectories, g.t_in, g.t_out, g.stride)?;
            Dataset::new(inputs, targets, g.domain_length)
        }
        GeneratorConfig::Gaussian(g) => {
            let draws = gaussian_functional_benchmark(g.samples, g.grid_points, g.k_smooth, g.sigma_eta, &mut rng)?;
            let n = g.grid_points;
            let inputs = draws.iter().flat_map(|(a, _, _)| a.iter().copied()).collect();
            let targets = draws.iter().flat_map(|(_, _, u)| u.iter().copied()).collect();
            Dataset::new(
                Tensor::from_vec(vec![g.samples, 1, n], inputs)?,
                Tensor::from_vec(vec![g.samples, 1, n], targets)?,
                1.0,
            )
        }
        GeneratorConfig::Heat(g) => {
            let n = g.grid_points;
            let (mut inputs, mut targets) = (Vec::new(), Vec::new());
            for _ in 0..g.samples {
                let (a, u) = heat_pair(n, g.domain_length, g.max_mode, g.time, &mut rng)?;
                inputs.extend(a);
                targets.extend(u);
            }
            Dataset::new(
                Tensor::from_vec(vec![g.samples, 1, n], inputs)?,
                Tensor::from_vec(vec![g.samples, 1, n], targets)?,
                g.domain_length,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_generator_lists_valid_names() {
        let err = DataConfig::from_json(r#"{"generator": "darcy"}"#).unwrap_err().to_string();
        assert!(err.contains("ks") && err.contains("gaussian") && err.contains("heat"), "{err}");
    }

    #[test]
    fn defaults_fill_missing_fields() {
        let c = DataConfig::from_json(r#"{"generator": "ks", "seed": 3, "trajectories": 2}"#).unwrap();
        match c.generator {
            GeneratorConfig::Ks(g) => assert_eq!((g.trajectories, g.grid_points), (2, 128)),
            _ => panic!("wrong generator"),
        }
        assert_eq!(c.seed, 3);
    }

    #[test]
    fn misspelled_fields_are_rejected() {
        assert!(DataConfig::from_json(r#"{"generator": "ks", "trajectory": 2}"#).is_err());
    }

    #[test]
    fn gaussian_generation_is_deterministic() {
        let c = DataConfig::from_json(r#"{"generator": "gaussian", "samples": 20, "grid_points": 16, "k_smooth": 4}"#).unwrap();
        assert_eq!(generate(&c).unwrap(), generate(&c).unwrap());
    }

    #[test]
    fn small_ks_run_windows_as_expected() {
        let c = DataConfig::from_json(
            r#"{"generator": "ks", "trajectories": 2, "grid_points": 32, "domain_length": 22.0,
                "burn_in": 1.0, "frames": 5, "t_in": 1, "t_out": 1}"#,
        )
        .unwrap();
        let d = generate(&c).unwrap();
        assert_eq!(d.len(), 2 * 4);
        assert_eq!(d.grid_points(), 32);
    }
}
