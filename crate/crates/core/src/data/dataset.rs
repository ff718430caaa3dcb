use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::container::{load_tensor, save_tensor};
use crate::data::ks::Trajectory;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::training::Samples;

/// Sliding windows over every trajectory: `t_in` frames of input followed by the next
/// `t_out` frames as target, advancing by `stride`. Returns `(S, t_in, N)` and `(S, t_out, N)`.
pub fn make_windows(
    trajectories: &[Trajectory],
    t_in: usize,
    t_out: usize,
    stride: usize,
) -> Result<(Tensor<f64>, Tensor<f64>)> {
    if t_in == 0 || t_out == 0 || stride == 0 {
        return Err(Error::config("t_in, t_out and stride must be positive"));
    }
    let n = trajectories
        .first()
        .and_then(|t| t.frames.first())
        .map(Vec::len)
        .ok_or_else(|| Error::config("no trajectory frames to window"))?;
    let span = t_in + t_out;
    let (mut inputs, mut targets, mut count) = (Vec::new(), Vec::new(), 0usize);
    for (i, traj) in trajectories.iter().enumerate() {
        if traj.len() < span {
            return Err(Error::config(format!(
                "trajectory {i} has {} frames, a window needs {span}",
                traj.len()
            )));
        }
        if traj.frames.iter().any(|f| f.len() != n) {
            return Err(Error::config(format!("trajectory {i} changes grid size")));
        }
        let mut start = 0;
        while start + span <= traj.len() {
            for f in &traj.frames[start..start + t_in] {
                inputs.extend_from_slice(f);
            }
            for f in &traj.frames[start + t_in..start + span] {
                targets.extend_from_slice(f);
            }
            count += 1;
            start += stride;
        }
    }
    Ok((
        Tensor::from_vec(vec![count, t_in, n], inputs)?,
        Tensor::from_vec(vec![count, t_out, n], targets)?,
    ))
}

/// Per-channel affine normalization `(x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Channels whose spread was zero, so their std was set to 1.
    pub floored_channels: Vec<usize>,
}

impl NormStats {
    /// Fits on rows `0..rows` of a `(S, C, N)` tensor.
    pub fn fit(t: &Tensor<f64>, rows: usize) -> Result<Self> {
        let (s, c, n) = dims3(t)?;
        if rows == 0 || rows > s {
            return Err(Error::config(format!("cannot fit statistics on {rows} of {s} samples")));
        }
        let mut stats = NormStats {
            mean: Vec::with_capacity(c),
            std: Vec::with_capacity(c),
            floored_channels: Vec::new(),
        };
        let count = (rows * n) as f64;
        for ch in 0..c {
            let values = || (0..rows).flat_map(move |r| t.data()[(r * c + ch) * n..(r * c + ch + 1) * n].iter());
            let mean = values().sum::<f64>() / count;
            let var = values().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
            let mut std = var.sqrt();
            if !(std > 0.0) || !std.is_finite() {
                std = 1.0;
                stats.floored_channels.push(ch);
            }
            stats.mean.push(mean);
            stats.std.push(std);
        }
        Ok(stats)
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// Normalizes one `(C, N)` slice in place.
    pub fn normalize_slice(&self, x: &mut [f64]) {
        let n = x.len() / self.channels();
        for (ch, row) in x.chunks_mut(n).enumerate() {
            row.iter_mut().for_each(|v| *v = (*v - self.mean[ch]) / self.std[ch]);
        }
    }

    /// Inverse of [`NormStats::normalize_slice`].
    pub fn denormalize_slice(&self, x: &mut [f64]) {
        let n = x.len() / self.channels();
        for (ch, row) in x.chunks_mut(n).enumerate() {
            row.iter_mut().for_each(|v| *v = *v * self.std[ch] + self.mean[ch]);
        }
    }
}

fn dims3(t: &Tensor<f64>) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [s, c, n] if !t.is_complex() => Ok((s, c, n)),
        _ => Err(Error::config(format!("expected a real (S, C, N) tensor, got {:?}", t.shape()))),
    }
}

/// Contiguous train/validation/test partition of the sample index range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Split {
    /// 80/10/10, with at least one validation and one test sample.
    pub fn standard(samples: usize) -> Result<Self> {
        let val = (samples / 10).max(1);
        let test = (samples / 10).max(1);
        if samples < val + test + 1 {
            return Err(Error::config(format!("{samples} samples are too few to split")));
        }
        Ok(Split {
            train: samples - val - test,
            val,
            test,
        })
    }

    pub fn train_range(&self) -> std::ops::Range<usize> {
        0..self.train
    }

    pub fn val_range(&self) -> std::ops::Range<usize> {
        self.train..self.train + self.val
    }

    pub fn test_range(&self) -> std::ops::Range<usize> {
        self.train + self.val..self.train + self.val + self.test
    }
}

/// Input/target pairs in physical units with normalization statistics from the train split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `(S, T_in, N)`.
    pub inputs: Tensor<f64>,
    /// `(S, T_out, N)`.
    pub targets: Tensor<f64>,
    pub domain_length: f64,
    pub split: Split,
    pub input_stats: NormStats,
    pub target_stats: NormStats,
}

impl Dataset {
    pub fn new(inputs: Tensor<f64>, targets: Tensor<f64>, domain_length: f64) -> Result<Self> {
        let (s, _, n) = dims3(&inputs)?;
        let (st, _, nt) = dims3(&targets)?;
        if s != st || n != nt {
            return Err(Error::config(format!(
                "inputs {:?} and targets {:?} disagree",
                inputs.shape(),
                targets.shape()
            )));
        }
        crate::fft::validate_len(n)?;
        if !inputs.all_finite() || !targets.all_finite() {
            return Err(Error::config("dataset contains non-finite values"));
        }
        let split = Split::standard(s)?;
        let input_stats = NormStats::fit(&inputs, split.train)?;
        let target_stats = NormStats::fit(&targets, split.train)?;
        Ok(Self {
            inputs,
            targets,
            domain_length,
            split,
            input_stats,
            target_stats,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn t_in(&self) -> usize {
        self.inputs.shape()[1]
    }

    pub fn t_out(&self) -> usize {
        self.targets.shape()[1]
    }

    pub fn grid_points(&self) -> usize {
        self.inputs.shape()[2]
    }

    /// Quadrature weight `1/N` of the normalized unit domain.
    pub fn weight(&self) -> f64 {
        1.0 / self.grid_points() as f64
    }

    fn item(t: &Tensor<f64>, i: usize) -> Tensor<f64> {
        let (c, n) = (t.shape()[1], t.shape()[2]);
        Tensor::from_vec(vec![c, n], t.data()[i * c * n..(i + 1) * c * n].to_vec()).expect("consistent slice")
    }

    /// Physical-unit input of sample `i`, shape `(T_in, N)`.
    pub fn raw_input(&self, i: usize) -> Tensor<f64> {
        Self::item(&self.inputs, i)
    }

    /// Physical-unit target of sample `i`, shape `(T_out, N)`.
    pub fn raw_target(&self, i: usize) -> Tensor<f64> {
        Self::item(&self.targets, i)
    }

    pub fn normalized_input(&self, i: usize) -> Tensor<f64> {
        let mut t = self.raw_input(i);
        self.input_stats.normalize_slice(t.data_mut());
        t
    }

    pub fn normalized_target(&self, i: usize) -> Tensor<f64> {
        let mut t = self.raw_target(i);
        self.target_stats.normalize_slice(t.data_mut());
        t
    }

    /// Normalized samples over `range`, converted to `T`.
    pub fn samples<T: Scalar>(&self, range: std::ops::Range<usize>) -> Samples<T> {
        Samples {
            inputs: range.clone().map(|i| self.normalized_input(i).cast()).collect(),
            targets: range.map(|i| self.normalized_target(i).cast()).collect(),
            weight: T::lit(self.weight()),
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const INPUTS_FILE: &str = "inputs.pnot";
pub const TARGETS_FILE: &str = "targets.pnot";

/// JSON description stored next to the tensor files of a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    /// Generator settings the data were produced with.
    pub generator: serde_json::Value,
    pub seed: u64,
    pub samples: usize,
    pub t_in: usize,
    pub t_out: usize,
    pub grid_points: usize,
    pub domain_length: f64,
    pub split: Split,
    pub input_stats: NormStats,
    pub target_stats: NormStats,
    pub inputs_file: String,
    pub targets_file: String,
}

impl Dataset {
    pub fn manifest(&self, generator: serde_json::Value, seed: u64) -> Manifest {
        Manifest {
            format_version: 1,
            generator,
            seed,
            samples: self.len(),
            t_in: self.t_in(),
            t_out: self.t_out(),
            grid_points: self.grid_points(),
            domain_length: self.domain_length,
            split: self.split,
            input_stats: self.input_stats.clone(),
            target_stats: self.target_stats.clone(),
            inputs_file: INPUTS_FILE.into(),
            targets_file: TARGETS_FILE.into(),
        }
    }

    /// Writes manifest and tensors into an existing directory.
    pub fn save_dir(&self, dir: &Path, generator: serde_json::Value, seed: u64) -> Result<()> {
        let manifest = self.manifest(generator, seed);
        let json = serde_json::to_string_pretty(&manifest)?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        save_tensor(&dir.join(INPUTS_FILE), &self.inputs)?;
        save_tensor(&dir.join(TARGETS_FILE), &self.targets)
    }

    pub fn load_dir(dir: &Path) -> Result<(Self, Manifest)> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let inputs = load_tensor(&dir.join(&manifest.inputs_file))?;
        let targets = load_tensor(&dir.join(&manifest.targets_file))?;
        let (s, c, n) = dims3(&inputs)?;
        if s != manifest.samples || c != manifest.t_in || n != manifest.grid_points || dims3(&targets)?.1 != manifest.t_out {
            return Err(Error::config(format!(
                "tensor shapes in {} disagree with the manifest",
                dir.display()
            )));
        }
        let dataset = Self {
            inputs,
            targets,
            domain_length: manifest.domain_length,
            split: manifest.split,
            input_stats: manifest.input_stats.clone(),
            target_stats: manifest.target_stats.clone(),
        };
        Ok((dataset, manifest))
    }
}
