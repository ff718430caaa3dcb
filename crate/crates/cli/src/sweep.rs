//! Hyperparameter grids: dropout rates, training ensemble size, and the method comparison.

use std::path::Path;
use std::str::FromStr;

use pno_core::data::Dataset;
use pno_core::training::{Method, TrainConfig};
use pno_core::{Error, Result};

use crate::commands::{dataset_id, evaluate_run, load_train_config, train_on};
use crate::eval::{mean_std, summarize, MetricsRecord};
use crate::report::{fmt_f64, write_csv, write_records, write_summary};

/// Weight and Fourier dropout rates; the dropout grid is their Cartesian product.
pub const DROPOUT_GRID: [f64; 5] = [0.01, 0.02, 0.05, 0.1, 0.2];
/// Training ensemble sizes.
pub const SAMPLE_GRID: [usize; 5] = [3, 5, 10, 20, 50];
/// Methods the sample-size sweep covers.
pub const SAMPLE_METHODS: [Method; 2] = [Method::PnoD, Method::PnoR];

pub const SWEEP_FILE: &str = "sweep.csv";
pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Dropout,
    Samples,
    /// Every method at the base settings, for multi-seed comparison tables.
    Methods,
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dropout" => Ok(SweepKind::Dropout),
            "samples" => Ok(SweepKind::Samples),
            "methods" => Ok(SweepKind::Methods),
            _ => Err(Error::config(format!(
                "unknown sweep kind `{s}`, expected one of dropout, samples, methods"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub method: Method,
    pub weight_dropout: f64,
    pub fourier_dropout: f64,
    pub m_train: usize,
}

impl SweepCell {
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            method: self.method,
            weight_dropout: self.weight_dropout,
            fourier_dropout: self.fourier_dropout,
            m_train: self.m_train,
            ..base.clone()
        }
    }
}

pub fn sweep_cells(kind: SweepKind, base: &TrainConfig) -> Result<Vec<SweepCell>> {
    let cell = |method, m_train| SweepCell {
        method,
        weight_dropout: base.weight_dropout,
        fourier_dropout: base.fourier_dropout,
        m_train,
    };
    Ok(match kind {
        SweepKind::Dropout => {
            if base.method == Method::PnoR {
                return Err(Error::config("the dropout sweep needs a dropout-sampled method (pno_d or mcd)"));
            }
            DROPOUT_GRID
                .iter()
                .flat_map(|&pw| {
                    DROPOUT_GRID.iter().map(move |&pf| SweepCell {
                        method: base.method,
                        weight_dropout: pw,
                        fourier_dropout: pf,
                        m_train: base.m_train,
                    })
                })
                .collect()
        }
        SweepKind::Samples => SAMPLE_METHODS
            .iter()
            .flat_map(|&m| SAMPLE_GRID.iter().map(move |&k| cell(m, k)))
            .collect(),
        SweepKind::Methods => Method::ALL.iter().map(|&m| cell(m, base.m_train)).collect(),
    })
}

/// Outcome of one cell over all seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: SweepCell,
    /// One row per successful seed; `wall_clock_seconds` is the median epoch time.
    pub runs: Vec<MetricsRecord>,
    /// Failures as `(seed, message)`; the sweep continues past them.
    pub errors: Vec<(u64, String)>,
}

impl CellResult {
    pub fn seconds_per_epoch(&self) -> Option<f64> {
        let t: Vec<f64> = self.runs.iter().filter_map(|r| r.wall_clock_seconds).collect();
        (!t.is_empty()).then(|| mean_std(&t).mean)
    }
}

/// Trains and evaluates every cell for every seed.
pub fn run_sweep(
    kind: SweepKind,
    base: &TrainConfig,
    dataset: &Dataset,
    dataset_name: &str,
    seeds: &[u64],
    m_eval: usize,
    on_cell: &mut dyn FnMut(&CellResult),
) -> Result<Vec<CellResult>> {
    if seeds.is_empty() {
        return Err(Error::config("a sweep needs at least one seed"));
    }
    let cells = sweep_cells(kind, base)?;
    let mut out = Vec::with_capacity(cells.len());
    for cell in cells {
        let mut result = CellResult {
            cell,
            runs: Vec::new(),
            errors: Vec::new(),
        };
        for &seed in seeds {
            let cfg = TrainConfig { seed, ..cell.apply(base) };
            let outcome = train_on(&cfg, dataset).and_then(|run| {
                let (record, _) = evaluate_run(&run.model, &run.header, dataset, dataset_name, m_eval, seed)?;
                Ok(MetricsRecord {
                    wall_clock_seconds: Some(run.seconds_per_epoch()),
                    ..record
                })
            });
            match outcome {
                Ok(r) => result.runs.push(r),
                Err(e) => result.errors.push((seed, e.to_string())),
            }
        }
        on_cell(&result);
        out.push(result);
    }
    Ok(out)
}

pub const SWEEP_COLUMNS: [&str; 15] = [
    "method",
    "weight_dropout",
    "fourier_dropout",
    "m_train",
    "seeds_ok",
    "l2",
    "es",
    "crps",
    "nll",
    "coverage_95",
    "width_95",
    "nll_floored_points",
    "epochs_run",
    "seconds_per_epoch",
    "error",
];

/// One row per cell with metrics averaged over the successful seeds.
pub fn write_sweep(path: &Path, results: &[CellResult]) -> Result<()> {
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            let c = &r.cell;
            let mut row = vec![
                c.method.name().to_string(),
                fmt_f64(c.weight_dropout),
                fmt_f64(c.fourier_dropout),
                c.m_train.to_string(),
                r.runs.len().to_string(),
            ];
            if r.runs.is_empty() {
                row.extend(std::iter::repeat_n(String::new(), 9));
            } else {
                let col = |f: fn(&MetricsRecord) -> f64| {
                    fmt_f64(mean_std(&r.runs.iter().map(f).collect::<Vec<_>>()).mean)
                };
                row.push(col(|m| m.l2));
                row.push(col(|m| m.es));
                row.push(col(|m| m.crps));
                row.push(col(|m| m.nll));
                row.push(col(|m| m.coverage_95));
                row.push(col(|m| m.width_95));
                row.push(r.runs.iter().map(|m| m.nll_floored_points).sum::<usize>().to_string());
                row.push(col(|m| m.epochs_run as f64));
                row.push(r.seconds_per_epoch().map(fmt_f64).unwrap_or_default());
            }
            let errors: Vec<String> = r.errors.iter().map(|(s, e)| format!("seed {s}: {e}")).collect();
            row.push(errors.join("; "));
            row
        })
        .collect();
    write_csv(path, &SWEEP_COLUMNS, &rows)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_sweep(
    kind: SweepKind,
    config: &Path,
    dataset_dir: &Path,
    out: &Path,
    seeds: &[u64],
    m_eval: usize,
    force: bool,
    on_cell: &mut dyn FnMut(&CellResult),
) -> Result<Vec<CellResult>> {
    let base = load_train_config(config)?;
    let (dataset, _) = Dataset::load_dir(dataset_dir)?;
    crate::commands::prepare_out_dir(out, force)?;
    let results = run_sweep(kind, &base, &dataset, &dataset_id(dataset_dir), seeds, m_eval, on_cell)?;
    write_sweep(&out.join(SWEEP_FILE), &results)?;
    let runs: Vec<MetricsRecord> = results.iter().flat_map(|r| r.runs.iter().cloned()).collect();
    write_records(&out.join(RUNS_FILE), &runs, true)?;
    if kind == SweepKind::Methods {
        write_summary(&out.join(SUMMARY_FILE), &summarize(&runs))?;
    }
    Ok(results)
}
