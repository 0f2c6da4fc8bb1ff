//! CSV result tables.
//!
//! Every file starts with `#` comment lines carrying the config hash and
//! seed that produced it, followed by a header row and comma-separated
//! records with LF line endings. Undefined values are empty fields.

use std::path::Path;

use jcas_core::training::EpochRecord;
use jcas_core::validation::MetricsRecord;

use crate::error::CliError;

/// A header row plus string records, ready to be written.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest round-trip formatting.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            meta: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Adds the provenance comment `config_hash=..., seed=...`.
    pub fn with_provenance(mut self, config_hash: &str, seed: u64) -> Self {
        self.meta.push(("config_hash".into(), config_hash.into()));
        self.meta.push(("seed".into(), seed.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        if !self.meta.is_empty() {
            let parts: Vec<String> = self.meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
            out.extend_from_slice(format!("# {}\n", parts.join(", ")).as_bytes());
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    /// Reads a table written by [`Table::write`] or any headed CSV with
    /// optional `#` comment lines.
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let csv_err = |msg: String| CliError::Csv {
            path: path.to_path_buf(),
            msg,
        };
        let mut meta = Vec::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            for part in line.trim_start_matches('#').split(',') {
                if let Some((k, v)) = part.split_once('=') {
                    meta.push((k.trim().to_string(), v.trim().to_string()));
                }
            }
        }
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_err(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec.map_err(|e| csv_err(e.to_string()))?.iter().map(str::to_string).collect());
        }
        Ok(Self { meta, header, rows })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Values of a column; empty or unparsable cells become `None`.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r.get(i).and_then(|s| s.parse().ok())).collect())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub const HISTORY_HEADER: &[&str] = &[
    "epoch",
    "stage",
    "encoding",
    "set_method",
    "loss_comm",
    "loss_detect",
    "loss_angle",
    "loss_total",
    "pd",
    "pf",
    "pf_max_minibatch",
    "bmi",
    "angle_rmse",
    "offset",
    "deep_fades",
];

pub fn history_row(r: &EpochRecord, encoding: &str, set_method: &str) -> Vec<String> {
    vec![
        r.epoch.to_string(),
        r.stage.to_string(),
        encoding.into(),
        set_method.into(),
        num(r.loss_comm),
        num(r.loss_detect),
        num(r.loss_angle),
        num(r.loss_total),
        opt(r.pd),
        opt(r.pf),
        opt(r.pf_max_minibatch),
        opt(r.bmi),
        opt(r.angle_rmse),
        num(r.offset),
        r.deep_fades.to_string(),
    ]
}

pub const METRICS_HEADER: &[&str] = &[
    "u",
    "scans",
    "bmi",
    "pd",
    "pf",
    "rmse_nn",
    "rmse_nn_all",
    "rmse_esprit",
    "nn_pairs",
    "esprit_pairs",
    "esprit_clamped",
    "gain_comm_db",
    "gain_radar_db",
];

pub fn metrics_row(r: &MetricsRecord) -> Vec<String> {
    vec![
        r.u.to_string(),
        r.scans.to_string(),
        opt(r.bmi),
        opt(r.pd),
        opt(r.pf),
        opt(r.rmse_nn),
        opt(r.rmse_nn_all),
        opt(r.rmse_esprit),
        r.nn_pairs.to_string(),
        r.esprit_pairs.to_string(),
        r.esprit_clamped.to_string(),
        num(r.gain_comm_db),
        num(r.gain_radar_db),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_read_round_trip() {
        let mut t = Table::new(&["u", "rmse"]).with_provenance("00ff", 7);
        t.push(vec!["1".into(), num(0.125)]);
        t.push(vec!["2".into(), opt(None)]);
        let bytes = t.to_bytes();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text, "# config_hash=00ff, seed=7\nu,rmse\n1,0.125\n2,\n");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        t.write(&p).unwrap();
        let back = Table::read(&p).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("rmse").unwrap(), vec![Some(0.125), None]);
        assert_eq!(back.meta("seed"), Some("7"));
        assert!(back.column("missing").is_none());
    }

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e7] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }
}
