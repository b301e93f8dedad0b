use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, HarnessError};

/// One metric value at one resample step. Field order is the CSV header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub seed: u64,
    pub episode: usize,
    pub resample_step: usize,
    pub inner_iter: usize,
    pub metric: String,
    pub value: f64,
}

pub const METRICS_HEADER: &str = "run_id,seed,episode,resample_step,inner_iter,metric,value";

/// A metric emitted by an episode, before the run columns are attached.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub resample_step: usize,
    pub inner_iter: usize,
    pub metric: String,
    pub value: f64,
}

impl Record {
    pub fn new(resample_step: usize, inner_iter: usize, metric: impl Into<String>, value: f64) -> Self {
        Self { resample_step, inner_iter, metric: metric.into(), value }
    }

    pub fn into_row(self, run_id: &str, seed: u64, episode: usize) -> MetricsRow {
        MetricsRow {
            run_id: run_id.to_string(),
            seed,
            episode,
            resample_step: self.resample_step,
            inner_iter: self.inner_iter,
            metric: self.metric,
            value: self.value,
        }
    }
}

/// Append-only CSV sink. Rows are written in the order received, so callers
/// that gather parallel work in a fixed order get byte-identical files.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl MetricsWriter<std::fs::File> {
    pub fn create(path: &Path) -> Result<Self, HarnessError> {
        let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
        Ok(Self::new(file))
    }
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(sink: W) -> Self {
        Self { inner: csv::WriterBuilder::new().has_headers(true).from_writer(sink) }
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<(), HarnessError> {
        self.inner.serialize(row)?;
        Ok(())
    }

    pub fn write_records(&mut self, run_id: &str, seed: u64, episode: usize, records: Vec<Record>) -> Result<(), HarnessError> {
        for r in records {
            self.write(&r.into_row(run_id, seed, episode))?;
        }
        self.inner.flush().map_err(|e| HarnessError::Io { path: "metrics".into(), source: e })
    }

    pub fn into_inner(self) -> Result<W, HarnessError> {
        self.inner.into_inner().map_err(|e| HarnessError::Io { path: "metrics".into(), source: e.into_error() })
    }
}

/// Reads a metrics CSV back.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, HarnessError> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(HarnessError::from)).collect()
}

/// Values of `metric` in file order, optionally restricted to one run.
pub fn metric_values<'a>(rows: &'a [MetricsRow], run_id: &'a str, metric: &'a str) -> impl Iterator<Item = &'a MetricsRow> + 'a {
    rows.iter().filter(move |r| r.run_id == run_id && r.metric == metric)
}

/// Machine-readable record of what a run was asked to do, written before
/// any heavy compute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub crate_version: String,
    pub command: String,
    pub seeds: Vec<u64>,
    pub train_seed: u64,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

pub const MANIFEST_FORMAT: &str = "harvest-manifest";

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig, checkpoint: Option<&Path>) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: 1,
            crate_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seeds: config.seeds.clone(),
            train_seed: config.train.seed,
            config: config.clone(),
            checkpoint: checkpoint.map(|p| p.display().to_string()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_round_trip() {
        let mut w = MetricsWriter::new(Vec::new());
        let recs = vec![Record::new(1, 1000, "pinn_error", 0.125), Record::new(1, 1000, "reward", -3.5e-7)];
        w.write_records("run/eval", 3, 0, recs).unwrap();
        let bytes = w.into_inner().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(METRICS_HEADER));
        assert_eq!(lines.next(), Some("run/eval,3,0,1,1000,pinn_error,0.125"));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, &text).unwrap();
        let rows = read_metrics(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].value, -3.5e-7);
        assert_eq!(metric_values(&rows, "run/eval", "reward").count(), 1);
    }

    #[test]
    fn non_finite_values_survive() {
        let mut w = MetricsWriter::new(Vec::new());
        w.write_records("r", 0, 0, vec![Record::new(1, 1, "pinn_error", f64::NAN)]).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert!(text.ends_with("pinn_error,NaN\n"), "{text}");
    }
}
