//! Test-set metrics in physical units and their aggregation over items and seeds.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use pno_core::data::Dataset;
use pno_core::operator::{sample_ensemble, OperatorModel};
use pno_core::scoring::{
    coverage_and_width, crps_field, energy_score_estimator, ensemble_nll, l2_metric, CrpsKind,
    GridFunction, PredictiveEnsemble,
};
use pno_core::training::Method;
use pno_core::{Error, Result};

/// Default ensemble size at evaluation.
pub const DEFAULT_M_EVAL: usize = 100;
/// Central interval level for coverage and width.
pub const INTERVAL_ALPHA: f64 = 0.05;

/// Metrics of one test item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemMetrics {
    pub index: usize,
    pub l2: f64,
    pub es: f64,
    pub crps: f64,
    pub nll: f64,
    pub coverage_95: f64,
    pub width_95: f64,
    pub nll_floored_points: usize,
}

/// One evaluation row for a method and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub method: String,
    pub seed: u64,
    pub dataset: String,
    pub l2: f64,
    pub es: f64,
    pub crps: f64,
    pub nll: f64,
    pub coverage_95: f64,
    pub width_95: f64,
    pub nll_floored_points: usize,
    pub epochs_run: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl MetricsRecord {
    /// `(name, value)` for every averaged metric, in column order.
    pub fn metrics(&self) -> [(&'static str, f64); 6] {
        [
            ("l2", self.l2),
            ("es", self.es),
            ("crps", self.crps),
            ("nll", self.nll),
            ("coverage_95", self.coverage_95),
            ("width_95", self.width_95),
        ]
    }
}

/// Ensemble for test item `i`, denormalized to physical units.
pub fn physical_ensemble(
    model: &OperatorModel<f64>,
    method: Method,
    dataset: &Dataset,
    i: usize,
    m: usize,
    rng: &mut dyn RngCore,
) -> Result<PredictiveEnsemble<f64>> {
    let ens = sample_ensemble(model, &dataset.normalized_input(i), method.sampler(), m, dataset.weight(), rng)?;
    let members = ens
        .members()
        .iter()
        .map(|f| {
            let mut v = f.values().to_vec();
            dataset.target_stats.denormalize_slice(&mut v);
            GridFunction::with_weight(v, dataset.weight())
        })
        .collect::<Result<Vec<_>>>()?;
    PredictiveEnsemble::new(members)
}

/// Every metric of one ensemble against one observation.
pub fn score_item(index: usize, ens: &PredictiveEnsemble<f64>, obs: &GridFunction<f64>) -> Result<ItemMetrics> {
    let nll = ensemble_nll(ens, obs)?;
    let (coverage_95, width_95) = coverage_and_width(ens, obs, INTERVAL_ALPHA)?;
    Ok(ItemMetrics {
        index,
        l2: l2_metric(ens, obs)?,
        es: energy_score_estimator(ens, obs)?,
        crps: crps_field(ens, obs, CrpsKind::Fair)?,
        nll: nll.value,
        coverage_95,
        width_95,
        nll_floored_points: nll.floored_points,
    })
}

/// Draws `m` members for every item in `range` and scores them against the physical target.
pub fn evaluate_items(
    model: &OperatorModel<f64>,
    method: Method,
    dataset: &Dataset,
    range: std::ops::Range<usize>,
    m: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<ItemMetrics>> {
    if m < 2 {
        return Err(Error::config(format!("evaluation needs at least 2 members, got {m}")));
    }
    let cfg = model.config();
    if cfg.in_channels != dataset.t_in() || cfg.out_channels != dataset.t_out() {
        return Err(Error::config(format!(
            "model maps {} to {} channels, dataset has {} and {}",
            cfg.in_channels,
            cfg.out_channels,
            dataset.t_in(),
            dataset.t_out()
        )));
    }
    range
        .map(|i| {
            let ens = physical_ensemble(model, method, dataset, i, m, rng)?;
            let obs = GridFunction::with_weight(dataset.raw_target(i).into_data(), dataset.weight())?;
            score_item(i, &ens, &obs)
        })
        .collect()
}

/// Arithmetic means over items; floored NLL points are summed.
pub fn mean_metrics(items: &[ItemMetrics]) -> Result<ItemMetrics> {
    if items.is_empty() {
        return Err(Error::config("no items to aggregate"));
    }
    let n = items.len() as f64;
    let mean = |f: fn(&ItemMetrics) -> f64| items.iter().map(f).sum::<f64>() / n;
    Ok(ItemMetrics {
        index: items.len(),
        l2: mean(|m| m.l2),
        es: mean(|m| m.es),
        crps: mean(|m| m.crps),
        nll: mean(|m| m.nll),
        coverage_95: mean(|m| m.coverage_95),
        width_95: mean(|m| m.width_95),
        nll_floored_points: items.iter().map(|m| m.nll_floored_points).sum(),
    })
}

impl MetricsRecord {
    pub fn from_mean(method: Method, seed: u64, dataset: &str, mean: &ItemMetrics, epochs_run: usize) -> Self {
        Self {
            method: method.name().to_string(),
            seed,
            dataset: dataset.to_string(),
            l2: mean.l2,
            es: mean.es,
            crps: mean.crps,
            nll: mean.nll,
            coverage_95: mean.coverage_95,
            width_95: mean.width_95,
            nll_floored_points: mean.nll_floored_points,
            epochs_run,
            wall_clock_seconds: None,
        }
    }
}

/// Mean and sample standard deviation of one metric over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MeanStd { mean, std }
}

/// Seed aggregate of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub seeds: usize,
    pub l2: MeanStd,
    pub es: MeanStd,
    pub crps: MeanStd,
    pub nll: MeanStd,
    pub coverage_95: MeanStd,
    pub width_95: MeanStd,
}

/// Groups rows by method (first-seen order) and aggregates every metric over seeds.
pub fn summarize(records: &[MetricsRecord]) -> Vec<MethodSummary> {
    let mut methods: Vec<&str> = Vec::new();
    for r in records {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    methods
        .into_iter()
        .map(|method| {
            let rows: Vec<&MetricsRecord> = records.iter().filter(|r| r.method == method).collect();
            let col = |f: fn(&MetricsRecord) -> f64| mean_std(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            MethodSummary {
                method: method.to_string(),
                seeds: rows.len(),
                l2: col(|r| r.l2),
                es: col(|r| r.es),
                crps: col(|r| r.crps),
                nll: col(|r| r.nll),
                coverage_95: col(|r| r.coverage_95),
                width_95: col(|r| r.width_95),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(index: usize, v: f64) -> ItemMetrics {
        ItemMetrics {
            index,
            l2: v,
            es: v,
            crps: v,
            nll: -v,
            coverage_95: 1.0,
            width_95: 2.0 * v,
            nll_floored_points: index,
        }
    }

    #[test]
    fn mean_of_items() {
        let m = mean_metrics(&[item(0, 1.0), item(1, 3.0)]).unwrap();
        assert_eq!((m.l2, m.nll, m.width_95, m.nll_floored_points), (2.0, -2.0, 4.0, 1));
    }

    #[test]
    fn sample_std_over_seeds() {
        let s = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!((s.mean, s.std), (2.0, 1.0));
        assert_eq!(mean_std(&[5.0]).std, 0.0);
    }

    #[test]
    fn collapsed_perfect_ensemble_scores_zero() {
        let obs = GridFunction::with_weight(vec![0.5, -1.0, 2.0, 0.0], 0.25).unwrap();
        let ens = PredictiveEnsemble::new(vec![obs.clone(); 4]).unwrap();
        let m = score_item(0, &ens, &obs).unwrap();
        assert_eq!((m.l2, m.es, m.crps, m.coverage_95, m.width_95), (0.0, 0.0, 0.0, 1.0, 0.0));
        assert_eq!(m.nll_floored_points, 4);
    }
}
