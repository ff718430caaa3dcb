use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{HeadKind, ModelConfig, Sampler};

/// Training method: which head, sampler and loss are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Dropout sampling trained on the energy score.
    PnoD,
    /// Reparameterized Gaussian head trained on the energy score.
    PnoR,
    /// Deterministic head trained on the L2 loss, sampled with dropout.
    Mcd,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::PnoD, Method::PnoR, Method::Mcd];

    pub fn name(self) -> &'static str {
        match self {
            Method::PnoD => "pno_d",
            Method::PnoR => "pno_r",
            Method::Mcd => "mcd",
        }
    }

    pub fn sampler(self) -> Sampler {
        match self {
            Method::PnoR => Sampler::Reparam,
            Method::PnoD | Method::Mcd => Sampler::Dropout,
        }
    }

    pub fn uses_energy_score(self) -> bool {
        self != Method::Mcd
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown method `{s}`, expected one of pno_d, pno_r, mcd")))
    }
}

/// Every optimization and architecture setting of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub method: Method,
    /// Ensemble size per training input; ignored by `mcd`.
    pub m_train: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub clip_norm: f64,
    pub seed: u64,
    /// Ignored by `pno_r`, whose single backbone pass is deterministic.
    pub weight_dropout: f64,
    /// Ignored by `pno_r`.
    pub fourier_dropout: f64,
    pub modes: usize,
    pub width: usize,
    pub layers: usize,
    pub t_in: usize,
    pub t_out: usize,
    /// Halve the learning rate after this many epochs without improvement.
    pub lr_halving_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::PnoD,
            m_train: 3,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            clip_norm: 1.0,
            seed: 0,
            weight_dropout: 0.05,
            fourier_dropout: 0.05,
            modes: 12,
            width: 20,
            layers: 4,
            t_in: 1,
            t_out: 1,
            lr_halving_patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.method.uses_energy_score() && self.m_train < 2 {
            return Err(Error::config(format!(
                "{} trains on the unbiased energy score, which needs m_train >= 2 (got {})",
                self.method, self.m_train
            )));
        }
        if self.patience == 0 {
            return Err(Error::config("patience must be at least 1"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::config("clip_norm must be positive"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("learning_rate must be positive and finite"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::config("batch_size and max_epochs must be positive"));
        }
        if self.lr_halving_patience == Some(0) {
            return Err(Error::config("lr_halving_patience must be at least 1"));
        }
        let model = self.model_config();
        model.validate()?;
        if self.method != Method::PnoR && !model.has_dropout() {
            return Err(Error::config(format!(
                "{} samples with dropout, so at least one dropout rate must be positive",
                self.method
            )));
        }
        Ok(())
    }

    /// Architecture implied by the method and the window lengths.
    pub fn model_config(&self) -> ModelConfig {
        let (head, pw, pf) = match self.method {
            Method::PnoR => (HeadKind::Reparam, 0.0, 0.0),
            Method::PnoD | Method::Mcd => (HeadKind::Deterministic, self.weight_dropout, self.fourier_dropout),
        };
        ModelConfig {
            in_channels: self.t_in,
            out_channels: self.t_out,
            width: self.width,
            modes: self.modes,
            layers: self.layers,
            head,
            weight_dropout: pw,
            fourier_dropout: pf,
        }
    }
}
