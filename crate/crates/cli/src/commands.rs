//! Subcommand implementations. Each returns a summary the binary prints; failures come back
//! as [`Error`] and map to exit codes in [`exit_code`].

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use pno_core::data::{generate, Checkpoint, DataConfig, Dataset, Manifest};
use pno_core::gradcheck::{run_suite, GradReport};
use pno_core::operator::{ModelConfig, OperatorModel};
use pno_core::propriety::{check_propriety, ProprietyReport, ProprietySettings};
use pno_core::training::{fit_with, init_model, stream_rng, streams, FitReport, TrainConfig};
use pno_core::{Error, Result};

use crate::eval::{evaluate_items, mean_metrics, ItemMetrics, MetricsRecord};
use crate::report::{write_history, write_items, write_json, write_records, write_timing};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const CHECKPOINT_FILE: &str = "checkpoint.pnoc";
pub const HISTORY_FILE: &str = "history.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const RESOLVED_CONFIG_FILE: &str = "config.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const ITEMS_FILE: &str = "items.csv";
pub const METRICS_JSON_FILE: &str = "metrics.json";

const CHECKPOINT_FORMAT: &str = "pno-checkpoint";

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Verification(_) => EXIT_VERIFICATION,
        _ => EXIT_CONFIG,
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Refuses a non-empty existing directory unless `force`.
pub(crate) fn prepare_out_dir(path: &Path, force: bool) -> Result<()> {
    if path.is_file() {
        return Err(Error::config(format!("{} exists and is a file", path.display())));
    }
    if path.is_dir() {
        let occupied = fs::read_dir(path).map_err(|e| Error::io(path, e))?.next().is_some();
        if occupied && !force {
            return Err(Error::config(format!(
                "{} already exists; pass --force to overwrite",
                path.display()
            )));
        }
    }
    create_dir(path)
}

pub fn load_train_config(path: &Path) -> Result<TrainConfig> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::config(format!("invalid training config {}: {e}", path.display())))
}

/// Short name of a dataset directory used in metric rows.
pub fn dataset_id(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

pub fn cmd_generate_data(config: &Path, out: &Path, seed: Option<u64>, force: bool) -> Result<Manifest> {
    let mut cfg = DataConfig::from_json(&read_text(config)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dataset = generate(&cfg)?;
    prepare_out_dir(out, force)?;
    dataset.save_dir(out, cfg.generator_json(), cfg.seed)?;
    Ok(dataset.manifest(cfg.generator_json(), cfg.seed))
}

/// JSON header stored in the checkpoint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub grid_points: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

pub fn checkpoint_of(model: &OperatorModel<f64>, header: &CheckpointHeader) -> Result<Checkpoint> {
    Ok(Checkpoint {
        header: serde_json::to_value(header)?,
        params: model
            .named_params()
            .into_iter()
            .map(|(name, t)| (name, t.clone()))
            .collect(),
    })
}

/// Accepts the checkpoint file itself or a training output directory.
pub fn load_checkpoint(path: &Path) -> Result<(OperatorModel<f64>, CheckpointHeader)> {
    let file: PathBuf = if path.is_dir() { path.join(CHECKPOINT_FILE) } else { path.to_path_buf() };
    let ckpt = Checkpoint::load(&file)?;
    let header: CheckpointHeader = serde_json::from_value(ckpt.header)
        .map_err(|e| Error::config(format!("invalid checkpoint header in {}: {e}", file.display())))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::config(format!("{} is not a model checkpoint", file.display())));
    }
    let model = OperatorModel::from_named(header.model.clone(), ckpt.params)?;
    Ok((model, header))
}

/// Training outcome held in memory.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub config: TrainConfig,
    pub model: OperatorModel<f64>,
    pub report: FitReport,
    pub header: CheckpointHeader,
}

impl TrainedRun {
    /// Median per-epoch wall-clock time.
    pub fn seconds_per_epoch(&self) -> f64 {
        let mut s: Vec<f64> = self.report.history.iter().map(|h| h.seconds).collect();
        s.sort_by(|a, b| a.total_cmp(b));
        if s.is_empty() {
            return 0.0;
        }
        let mid = s.len() / 2;
        if s.len() % 2 == 1 {
            s[mid]
        } else {
            0.5 * (s[mid - 1] + s[mid])
        }
    }
}

/// Matches the window lengths to the dataset and fits on its train/validation splits.
pub fn train_on(config: &TrainConfig, dataset: &Dataset) -> Result<TrainedRun> {
    let mut config = config.clone();
    config.t_in = dataset.t_in();
    config.t_out = dataset.t_out();
    config.validate()?;
    let mut model = init_model::<f64>(&config)?;
    let train = dataset.samples::<f64>(dataset.split.train_range());
    let val = dataset.samples::<f64>(dataset.split.val_range());
    let report = fit_with(&mut model, &train, &val, &config, &mut |_| {})?;
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        model: model.config().clone(),
        train: config.clone(),
        grid_points: dataset.grid_points(),
        epochs_run: report.epochs_run(),
        best_epoch: report.best_epoch,
        best_val_loss: report.best_val_loss,
    };
    Ok(TrainedRun {
        config,
        model,
        report,
        header,
    })
}

pub fn cmd_train(
    config: &Path,
    dataset_dir: &Path,
    out: &Path,
    seed: Option<u64>,
    force: bool,
) -> Result<TrainedRun> {
    let mut cfg = load_train_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let (dataset, _) = Dataset::load_dir(dataset_dir)?;
    prepare_out_dir(out, force)?;
    let run = train_on(&cfg, &dataset)?;
    checkpoint_of(&run.model, &run.header)?.save(&out.join(CHECKPOINT_FILE))?;
    write_history(&out.join(HISTORY_FILE), &run.report.history)?;
    write_timing(&out.join(TIMING_FILE), &run.report.history)?;
    write_json(&out.join(RESOLVED_CONFIG_FILE), &run.config)?;
    Ok(run)
}

/// Test-split evaluation of a model; deterministic given the seed.
pub fn evaluate_run(
    model: &OperatorModel<f64>,
    header: &CheckpointHeader,
    dataset: &Dataset,
    dataset_name: &str,
    m_eval: usize,
    seed: u64,
) -> Result<(MetricsRecord, Vec<ItemMetrics>)> {
    if header.grid_points != dataset.grid_points() {
        return Err(Error::config(format!(
            "checkpoint was trained on {} grid points, dataset has {}",
            header.grid_points,
            dataset.grid_points()
        )));
    }
    let method = header.train.method;
    let mut rng = stream_rng(seed, streams::EVALUATION);
    let items = evaluate_items(model, method, dataset, dataset.split.test_range(), m_eval, &mut rng)?;
    let mean = mean_metrics(&items)?;
    let record = MetricsRecord::from_mean(method, header.train.seed, dataset_name, &mean, header.epochs_run);
    Ok((record, items))
}

#[derive(Debug, Clone, Serialize)]
struct MetricsJson<'a> {
    m_eval: usize,
    aggregate: &'a MetricsRecord,
    items: &'a [ItemMetrics],
}

pub fn cmd_evaluate(
    checkpoint: &Path,
    dataset_dir: &Path,
    out: &Path,
    m_eval: usize,
    seed: Option<u64>,
    force: bool,
) -> Result<MetricsRecord> {
    let (model, header) = load_checkpoint(checkpoint)?;
    let (dataset, _) = Dataset::load_dir(dataset_dir)?;
    let start = Instant::now();
    let (record, items) = evaluate_run(
        &model,
        &header,
        &dataset,
        &dataset_id(dataset_dir),
        m_eval,
        seed.unwrap_or(header.train.seed),
    )?;
    let seconds = start.elapsed().as_secs_f64();
    prepare_out_dir(out, force)?;
    write_records(&out.join(METRICS_FILE), std::slice::from_ref(&record), false)?;
    write_items(&out.join(ITEMS_FILE), &items)?;
    write_json(
        &out.join(METRICS_JSON_FILE),
        &MetricsJson {
            m_eval,
            aggregate: &record,
            items: &items,
        },
    )?;
    Ok(MetricsRecord {
        wall_clock_seconds: Some(seconds),
        ..record
    })
}

pub fn cmd_check_propriety(settings: ProprietySettings, out: Option<&Path>) -> Result<ProprietyReport> {
    let report = check_propriety(settings)?;
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    if !report.passed() {
        let dump = serde_json::to_string_pretty(&report.violations)?;
        return Err(Error::Verification(format!(
            "{} propriety violations:\n{dump}",
            report.violations.len()
        )));
    }
    Ok(report)
}

pub fn cmd_grad_check(seed: u64, out: Option<&Path>) -> Result<Vec<GradReport>> {
    let reports = run_suite(seed)?;
    if let Some(path) = out {
        let rows: Vec<serde_json::Value> = reports
            .iter()
            .map(|r| serde_json::json!({"check": r.name, "rel_err": r.rel_err, "tolerance": r.tolerance}))
            .collect();
        write_json(path, &rows)?;
    }
    let failed: Vec<&GradReport> = reports.iter().filter(|r| !r.passed()).collect();
    if !failed.is_empty() {
        let names: Vec<String> = failed.iter().map(|r| format!("{} ({:.3e})", r.name, r.rel_err)).collect();
        return Err(Error::Verification(format!("gradient check failed: {}", names.join(", "))));
    }
    Ok(reports)
}
