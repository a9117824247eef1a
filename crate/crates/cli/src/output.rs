//! Result emission: CSV tables and line-delimited JSON records.
//!
//! Every run appends one record to `<out>.jsonl` carrying the experiment
//! id, the full effective config (re-runnable as a config file), named
//! metrics, the seed, the toolkit version, and the wall-clock duration.
//! Tabular data goes to `<out>.csv` with a header row.

use anyhow::{Context, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub config: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, f64>,
    pub notes: BTreeMap<String, String>,
    pub seed: u64,
    pub version: String,
    pub duration_s: f64,
}

impl ResultRecord {
    pub fn new(experiment: &str, config: BTreeMap<String, String>, seed: u64) -> Self {
        ResultRecord {
            experiment: experiment.to_string(),
            config,
            metrics: BTreeMap::new(),
            notes: BTreeMap::new(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_s: 0.0,
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) -> &mut Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    pub fn note(&mut self, name: &str, value: &str) -> &mut Self {
        self.notes.insert(name.to_string(), value.to_string());
        self
    }
}

/// Output paths derived from the `--out` prefix.
pub struct OutputPaths {
    pub csv: PathBuf,
    pub jsonl: PathBuf,
}

impl OutputPaths {
    pub fn from_prefix(prefix: &Path) -> OutputPaths {
        OutputPaths {
            csv: prefix.with_extension("csv"),
            jsonl: prefix.with_extension("jsonl"),
        }
    }
}

pub fn write_record(paths: &OutputPaths, record: &ResultRecord) -> Result<()> {
    let line = serde_json::to_string(record)?;
    let mut existing = if paths.jsonl.exists() {
        std::fs::read_to_string(&paths.jsonl)
            .with_context(|| format!("reading {}", paths.jsonl.display()))?
    } else {
        String::new()
    };
    existing.push_str(&line);
    existing.push('\n');
    std::fs::write(&paths.jsonl, existing)
        .with_context(|| format!("writing {}", paths.jsonl.display()))?;
    Ok(())
}

/// Write one CSV table (header + rows of floats formatted with full
/// round-trip precision).
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
