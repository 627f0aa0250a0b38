use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use skillsight::checkpoint::write_json_atomic;

use crate::Failure;

/// Contents of `run.json`.
#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    argv: &'a [String],
    version: &'static str,
    seed: Option<u64>,
    config: &'a serde_json::Value,
    /// SHA-256 of checkpoints consumed by the run.
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a [String],
    started_unix_s: f64,
    wall_time_s: f64,
}

pub struct Run {
    command: &'static str,
    argv: Vec<String>,
    started: Instant,
    started_unix_s: f64,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl Run {
    pub fn start(command: &'static str, argv: &[String]) -> Self {
        Self {
            command,
            argv: argv.to_vec(),
            started: Instant::now(),
            started_unix_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
            seed: None,
            config: serde_json::Value::Null,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn config<T: Serialize>(&mut self, cfg: &T) {
        self.config = serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null);
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn finish(self, dir: &Path) -> Result<(), Failure> {
        let record = RunRecord {
            command: self.command,
            argv: &self.argv,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            config: &self.config,
            inputs: &self.inputs,
            outputs: &self.outputs,
            started_unix_s: self.started_unix_s,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        write_json_atomic(&dir.join("run.json"), &record)?;
        Ok(())
    }
}

/// One JSON object per line, flushed as it goes so a crashed run keeps its
/// history.
pub struct MetricsLog {
    path: PathBuf,
    file: BufWriter<File>,
}

impl MetricsLog {
    pub fn create(path: PathBuf) -> Result<Self, Failure> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
        }
        let file = File::create(&path).map_err(|e| io_failure(&path, e))?;
        Ok(Self {
            path,
            file: BufWriter::new(file),
        })
    }

    pub fn append<T: Serialize>(&mut self, row: &T) {
        let line = serde_json::to_string(row).expect("metrics serialize");
        if writeln!(self.file, "{line}").and_then(|_| self.file.flush()).is_err() {
            log::warn!("could not append to {}", self.path.display());
        }
    }
}

pub fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("i/o error at {}: {e}", path.display()))
}
