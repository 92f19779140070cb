//! Output files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Shortest decimal that parses back to the same `f64`; `inf`/`-inf` for
/// infinities.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Hex SHA-256 of the compact JSON of `config`. Field order is fixed by the
/// type, so the bytes are canonical.
pub fn config_hash<T: Serialize>(config: &T) -> CliResult<String> {
    let bytes = serde_json::to_vec(config).map_err(|e| CliError::Invariant(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub base_seed: u64,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub wall_time_secs: f64,
    pub outputs: Vec<PathBuf>,
}

/// Collects outputs of one command and writes them under `dir`.
pub struct Run {
    dir: PathBuf,
    command: String,
    started: Instant,
    started_at: DateTime<Utc>,
    outputs: Vec<PathBuf>,
}

fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl Run {
    pub fn start(dir: &Path, command: &str) -> Self {
        Run {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            started: Instant::now(),
            started_at: Utc::now(),
            outputs: Vec::new(),
        }
    }

    fn path(&mut self, name: &str) -> CliResult<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let path = self.dir.join(name);
        self.outputs.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let path = self.path(name)?;
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Invariant(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> CliResult<()> {
        let path = self.path(name)?;
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e))?;
        w.write_record(header).map_err(|e| CliError::io(&path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| CliError::io(&path, e))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))
    }

    /// Writes `manifest.json` listing every output written so far.
    pub fn finish(mut self, config_hash: String, base_seed: u64) -> CliResult<()> {
        let finished = Utc::now();
        let manifest = RunManifest {
            command: self.command.clone(),
            config_hash,
            base_seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: timestamp(self.started_at),
            finished_at: timestamp(finished),
            wall_time_secs: self.started.elapsed().as_secs_f64(),
            outputs: self.outputs.clone(),
        };
        self.write_json("manifest.json", &manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 5.0, -2.5e-300, 1e21, f64::MAX] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        assert_eq!(num(5.0), "5.0");
    }

    #[test]
    fn hash_is_stable() {
        let a = config_hash(&serde_json::json!({"a": 1})).unwrap();
        assert_eq!(a, config_hash(&serde_json::json!({"a": 1})).unwrap());
        assert_eq!(a.len(), 64);
        assert_ne!(a, config_hash(&serde_json::json!({"a": 2})).unwrap());
    }
}
