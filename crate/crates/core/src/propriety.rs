//! Randomized checks of energy-score propriety on discrete measures.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scoring::{energy_score_population, kernel_score_induced, propriety_gap, DiscreteMeasure};

pub const GAP_TOLERANCE: f64 = 1e-12;
pub const EQUAL_TOLERANCE: f64 = 1e-9;
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
pub const MAX_DIMS: usize = 3;
pub const MAX_ATOMS: usize = 5;
/// Anchors tried per trial for the kernel identity.
pub const ANCHORS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProprietySettings {
    pub trials: usize,
    pub dims: usize,
    pub atoms: usize,
    pub seed: u64,
}

impl ProprietySettings {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if !(1..=MAX_DIMS).contains(&self.dims) {
            return Err(Error::config(format!("dims must lie in 1..={MAX_DIMS}, got {}", self.dims)));
        }
        if !(1..=MAX_ATOMS).contains(&self.atoms) {
            return Err(Error::config(format!("atoms must lie in 1..={MAX_ATOMS}, got {}", self.atoms)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureDump {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl From<&DiscreteMeasure<f64>> for MeasureDump {
    fn from(m: &DiscreteMeasure<f64>) -> Self {
        Self {
            atoms: m.atoms().to_vec(),
            weights: m.weights().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// `S(Q, P) - S(P, P)` below `-GAP_TOLERANCE`.
    NegativeGap { trial: usize, p: MeasureDump, q: MeasureDump, gap: f64 },
    /// Identical measures (atoms permuted) with a non-zero gap.
    EqualPairGap { trial: usize, p: MeasureDump, q: MeasureDump, gap: f64 },
    /// Kernel score and energy score disagree.
    KernelIdentity { trial: usize, p: MeasureDump, x: Vec<f64>, z0: Vec<f64>, error: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProprietyReport {
    pub trials: usize,
    pub equal_pairs: usize,
    pub min_gap: f64,
    pub max_equal_gap: f64,
    pub max_identity_error: f64,
    /// Spread of the kernel score over anchors, maximized over trials.
    pub max_anchor_spread: f64,
    pub violations: Vec<Violation>,
}

impl ProprietyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// Between 1 and `max_atoms` atoms in `[-2, 2]^d` with random normalized weights.
pub fn random_measure(rng: &mut ChaCha8Rng, d: usize, max_atoms: usize) -> DiscreteMeasure<f64> {
    let k = rng.random_range(1..=max_atoms);
    let atoms = (0..k).map(|_| point(rng, d)).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    // Put the rounding residue on the last atom so the sum is exactly representable as 1.
    let rest: f64 = weights[..k - 1].iter().sum();
    weights[k - 1] = 1.0 - rest;
    DiscreteMeasure::new(atoms, weights).expect("valid random measure")
}

fn permuted(rng: &mut ChaCha8Rng, m: &DiscreteMeasure<f64>) -> DiscreteMeasure<f64> {
    let mut pairs: Vec<(Vec<f64>, f64)> = m.atoms().iter().cloned().zip(m.weights().iter().copied()).collect();
    pairs.shuffle(rng);
    let (atoms, weights) = pairs.into_iter().unzip();
    DiscreteMeasure::new(atoms, weights).expect("permutation of a valid measure")
}

/// Draws `trials` pairs `P != Q` and checks the gap sign, draws `trials / 10` pairs with
/// `P == Q` and checks the gap vanishes, and checks the kernel-score identity at
/// [`ANCHORS`] random anchors per trial.
pub fn check_propriety(settings: ProprietySettings) -> Result<ProprietyReport> {
    settings.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut report = ProprietyReport {
        trials: settings.trials,
        equal_pairs: settings.trials / 10,
        min_gap: f64::INFINITY,
        max_equal_gap: 0.0,
        max_identity_error: 0.0,
        max_anchor_spread: 0.0,
        violations: Vec::new(),
    };
    for trial in 0..settings.trials {
        let d = rng.random_range(1..=settings.dims);
        let p = random_measure(&mut rng, d, settings.atoms);
        let mut q = random_measure(&mut rng, d, settings.atoms);
        while q.same_measure(&p, 0.0) {
            q = random_measure(&mut rng, d, settings.atoms);
        }
        let gap = propriety_gap(&p, &q)?;
        report.min_gap = report.min_gap.min(gap);
        if gap < -GAP_TOLERANCE {
            report.violations.push(Violation::NegativeGap {
                trial,
                p: (&p).into(),
                q: (&q).into(),
                gap,
            });
        }

        let x = point(&mut rng, d);
        let es = energy_score_population(&p, &x)?;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..ANCHORS {
            let z0 = point(&mut rng, d);
            let ks = kernel_score_induced(&p, &x, &z0)?;
            lo = lo.min(ks);
            hi = hi.max(ks);
            let error = (ks - es).abs();
            report.max_identity_error = report.max_identity_error.max(error);
            if !(error < IDENTITY_TOLERANCE) {
                report.violations.push(Violation::KernelIdentity {
                    trial,
                    p: (&p).into(),
                    x: x.clone(),
                    z0,
                    error,
                });
            }
        }
        report.max_anchor_spread = report.max_anchor_spread.max(hi - lo);
    }
    for trial in 0..report.equal_pairs {
        let d = rng.random_range(1..=settings.dims);
        let p = random_measure(&mut rng, d, settings.atoms);
        let q = permuted(&mut rng, &p);
        let gap = propriety_gap(&p, &q)?;
        report.max_equal_gap = report.max_equal_gap.max(gap.abs());
        if !(gap.abs() < EQUAL_TOLERANCE) {
            report.violations.push(Violation::EqualPairGap {
                trial,
                p: (&p).into(),
                q: (&q).into(),
                gap,
            });
        }
    }
    Ok(report)
}
