//! CSV and JSON writers. Floats are written with 17 significant digits so every value
//! parses back to the same `f64`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use pno_core::training::EpochRecord;
use pno_core::{Error, Result};

use crate::eval::{ItemMetrics, MeanStd, MethodSummary, MetricsRecord};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::config(format!("csv error in {}: {e}", path.display()))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rows of a headed CSV file deserialized by column name.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub const RECORD_COLUMNS: [&str; 11] = [
    "method",
    "seed",
    "dataset",
    "l2",
    "es",
    "crps",
    "nll",
    "coverage_95",
    "width_95",
    "nll_floored_points",
    "epochs_run",
];

fn record_row(r: &MetricsRecord) -> Vec<String> {
    vec![
        r.method.clone(),
        r.seed.to_string(),
        r.dataset.clone(),
        fmt_f64(r.l2),
        fmt_f64(r.es),
        fmt_f64(r.crps),
        fmt_f64(r.nll),
        fmt_f64(r.coverage_95),
        fmt_f64(r.width_95),
        r.nll_floored_points.to_string(),
        r.epochs_run.to_string(),
    ]
}

/// Metric rows; wall-clock time is appended as a last column only when `timed`.
pub fn write_records(path: &Path, records: &[MetricsRecord], timed: bool) -> Result<()> {
    let mut header = RECORD_COLUMNS.to_vec();
    if timed {
        header.push("wall_clock_seconds");
    }
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let mut row = record_row(r);
            if timed {
                row.push(r.wall_clock_seconds.map(fmt_f64).unwrap_or_default());
            }
            row
        })
        .collect();
    write_csv(path, &header, &rows)
}

pub fn write_items(path: &Path, items: &[ItemMetrics]) -> Result<()> {
    let rows: Vec<Vec<String>> = items
        .iter()
        .map(|m| {
            vec![
                m.index.to_string(),
                fmt_f64(m.l2),
                fmt_f64(m.es),
                fmt_f64(m.crps),
                fmt_f64(m.nll),
                fmt_f64(m.coverage_95),
                fmt_f64(m.width_95),
                m.nll_floored_points.to_string(),
            ]
        })
        .collect();
    write_csv(
        path,
        &["index", "l2", "es", "crps", "nll", "coverage_95", "width_95", "nll_floored_points"],
        &rows,
    )
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|h| {
            vec![
                h.epoch.to_string(),
                fmt_f64(h.train_loss),
                fmt_f64(h.val_loss),
                fmt_f64(h.learning_rate),
                fmt_f64(h.max_grad_norm),
            ]
        })
        .collect();
    write_csv(path, &["epoch", "train_loss", "val_loss", "learning_rate", "max_grad_norm"], &rows)
}

pub fn write_timing(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let rows: Vec<Vec<String>> = history.iter().map(|h| vec![h.epoch.to_string(), fmt_f64(h.seconds)]).collect();
    write_csv(path, &["epoch", "seconds"], &rows)
}

pub fn write_summary(path: &Path, summaries: &[MethodSummary]) -> Result<()> {
    let mut header = vec!["method".to_string(), "seeds".to_string()];
    for name in ["l2", "es", "crps", "nll", "coverage_95", "width_95"] {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_std"));
    }
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            let mut row = vec![s.method.clone(), s.seeds.to_string()];
            for v in [s.l2, s.es, s.crps, s.nll, s.coverage_95, s.width_95] {
                let MeanStd { mean, std } = v;
                row.push(fmt_f64(mean));
                row.push(fmt_f64(std));
            }
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(path, &header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digit_floats_roundtrip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn records_roundtrip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let r = MetricsRecord {
            method: "pno_d".into(),
            seed: 3,
            dataset: "ks, small".into(),
            l2: 0.1,
            es: -1.0 / 3.0,
            crps: 2.0f64.sqrt(),
            nll: -7.25,
            coverage_95: 0.95,
            width_95: 1e-17,
            nll_floored_points: 2,
            epochs_run: 11,
            wall_clock_seconds: None,
        };
        write_records(&path, std::slice::from_ref(&r), false).unwrap();
        let back: Vec<MetricsRecord> = read_csv(&path).unwrap();
        assert_eq!(back, vec![r]);
    }
}
