//! Shared run state: derived RNG streams, accumulated statistics and checks,
//! written files, and the final summary record.

use std::collections::BTreeMap;
use std::fmt::{self, Display};
use std::io;
use std::path::PathBuf;
use std::time::Instant;

use cofrag::rng::seeded_stream;
use cofrag::stats::CheckReport;
use ndarray::Array2;
use serde::Serialize;
use serde_json::Value;

use crate::config::OutputFormat;
use crate::output::{write_matrix, write_table, Cell};

pub struct RunSettings {
    pub seed: u64,
    pub out: PathBuf,
    pub format: OutputFormat,
}

/// Which derived RNG stream served which purpose; recorded in summary.json
/// so any stage can be reproduced in isolation from the global seed.
#[derive(Serialize)]
pub struct StreamRecord {
    pub purpose: String,
    pub stream: u64,
}

#[derive(Serialize)]
struct ErrorRecord {
    kind: String,
    message: String,
}

pub enum RunError {
    Core(cofrag::Error),
    Io(io::Error),
}

impl From<cofrag::Error> for RunError {
    fn from(err: cofrag::Error) -> Self {
        RunError::Core(err)
    }
}

impl From<io::Error> for RunError {
    fn from(err: io::Error) -> Self {
        RunError::Io(err)
    }
}

impl Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Core(err) => write!(f, "{err}"),
            RunError::Io(err) => write!(f, "output: {err}"),
        }
    }
}

impl RunError {
    fn kind(&self) -> String {
        match self {
            RunError::Io(_) => "io".to_string(),
            // The Debug form of an enum value starts with its variant name.
            RunError::Core(err) => {
                let debug = format!("{err:?}");
                debug
                    .split(|c: char| !c.is_ascii_alphanumeric())
                    .next()
                    .unwrap_or("error")
                    .to_string()
            }
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'a str,
    seed: u64,
    format: String,
    resolved_config: &'a BTreeMap<String, String>,
    seed_streams: &'a [StreamRecord],
    statistics: &'a BTreeMap<String, Value>,
    checks: &'a [CheckReport],
    all_checks_pass: bool,
    outputs: &'a [String],
    elapsed_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorRecord>,
}

pub struct RunCtx {
    command: &'static str,
    settings: RunSettings,
    resolved: BTreeMap<String, String>,
    streams: Vec<StreamRecord>,
    statistics: BTreeMap<String, Value>,
    checks: Vec<CheckReport>,
    outputs: Vec<String>,
    started: Instant,
}

impl RunCtx {
    pub fn create(
        command: &'static str,
        settings: RunSettings,
        resolved: BTreeMap<String, String>,
    ) -> io::Result<RunCtx> {
        std::fs::create_dir_all(&settings.out)?;
        Ok(RunCtx {
            command,
            settings,
            resolved,
            streams: Vec::new(),
            statistics: BTreeMap::new(),
            checks: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    /// Next derived RNG stream for the given purpose.
    pub fn stream(&mut self, purpose: &str) -> rand_chacha::ChaCha8Rng {
        let index = self.streams.len() as u64;
        self.streams.push(StreamRecord {
            purpose: purpose.to_string(),
            stream: index,
        });
        seeded_stream(self.settings.seed, index)
    }

    pub fn stat_f(&mut self, key: &str, value: f64) {
        if let Some(num) = serde_json::Number::from_f64(value) {
            self.statistics.insert(key.to_string(), Value::Number(num));
        }
    }

    pub fn stat_u(&mut self, key: &str, value: u64) {
        self.statistics.insert(key.to_string(), Value::from(value));
    }

    pub fn table(&mut self, stem: &str, columns: &[String], rows: &[Vec<Cell>]) -> io::Result<()> {
        let name = write_table(
            &self.settings.out,
            stem,
            self.settings.format,
            columns,
            rows,
        )?;
        self.outputs.push(name);
        Ok(())
    }

    pub fn matrix(&mut self, stem: &str, matrix: &Array2<f64>) -> io::Result<()> {
        let name = write_matrix(&self.settings.out, stem, self.settings.format, matrix)?;
        self.outputs.push(name);
        Ok(())
    }

    /// Records a check and echoes its verdict to stdout.
    pub fn check(&mut self, report: CheckReport) {
        let verdict = if report.pass { "pass" } else { "FAIL" };
        println!(
            "check {}: {verdict} (statistic {:.6e}, bound {:.6e})",
            report.test, report.statistic, report.critical_value
        );
        self.checks.push(report);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn write_summary(&self, error: Option<&RunError>) -> io::Result<PathBuf> {
        let summary = Summary {
            command: self.command,
            seed: self.settings.seed,
            format: self.settings.format.to_string(),
            resolved_config: &self.resolved,
            seed_streams: &self.streams,
            statistics: &self.statistics,
            checks: &self.checks,
            all_checks_pass: self.all_pass() && error.is_none(),
            outputs: &self.outputs,
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
            error: error.map(|e| ErrorRecord {
                kind: e.kind(),
                message: e.to_string(),
            }),
        };
        let path = self.settings.out.join("summary.json");
        let mut text = serde_json::to_string_pretty(&summary).map_err(io::Error::other)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
