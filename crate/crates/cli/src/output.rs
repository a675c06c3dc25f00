//! Artifact writing. Every artifact carries the tool version and the fully
//! resolved configuration: JSON as top-level keys, CSV as `# ` comment lines.

use std::io::Write;
use std::path::PathBuf;

use gumbel_exit::ARTIFACT_VERSION;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;

/// Where artifacts go: the `out` directory when configured, else stdout.
pub struct Sink {
    dir: Option<PathBuf>,
    header: Value,
    config_line: String,
}

impl Sink {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        if let Some(dir) = &cfg.out {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Self {
            dir: cfg.out.clone(),
            header: cfg.header(),
            config_line: cfg.header_json(),
        })
    }

    pub fn preamble(&self) -> Vec<String> {
        vec![format!("artifact_version: {ARTIFACT_VERSION}"), format!("config: {}", self.config_line)]
    }

    /// `payload` with `artifact_version` and `config` added. Non-object
    /// payloads are placed under `result`.
    pub fn json_document<T: Serialize>(&self, payload: &T) -> Result<Vec<u8>, CliError> {
        let mut doc = Map::new();
        doc.insert("artifact_version".into(), Value::String(ARTIFACT_VERSION.into()));
        doc.insert("config".into(), self.header.clone());
        match serde_json::to_value(payload)? {
            Value::Object(fields) => doc.extend(fields),
            other => {
                doc.insert("result".into(), other);
            }
        }
        let mut bytes = serde_json::to_vec_pretty(&Value::Object(doc))?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    /// CSV bytes: preamble comments, a header row, then `rows`.
    pub fn csv_document(&self, extra_preamble: &[String], header: &str, rows: &[String]) -> Vec<u8> {
        let mut out = Vec::new();
        for line in self.preamble().iter().chain(extra_preamble) {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "{header}");
        for r in rows {
            let _ = writeln!(out, "{r}");
        }
        out
    }

    /// Write `bytes` to `<out>/<name>` or stdout. Returns the path written.
    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<Option<PathBuf>, CliError> {
        match &self.dir {
            Some(dir) => {
                let path = dir.join(name);
                std::fs::write(&path, bytes)?;
                log::info!("wrote {}", path.display());
                Ok(Some(path))
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(bytes)?;
                stdout.flush()?;
                Ok(None)
            }
        }
    }

    pub fn has_dir(&self) -> bool {
        self.dir.is_some()
    }

    /// Emit a JSON payload or CSV rows depending on `format`.
    pub fn emit<T: Serialize>(
        &self,
        stem: &str,
        format: Format,
        payload: &T,
        csv: impl FnOnce() -> (String, Vec<String>),
    ) -> Result<(), CliError> {
        match format {
            Format::Json => self.write(&format!("{stem}.json"), &self.json_document(payload)?)?,
            Format::Csv => {
                let (header, rows) = csv();
                self.write(&format!("{stem}.csv"), &self.csv_document(&[], &header, &rows))?
            }
        };
        Ok(())
    }
}

/// Shortest round-trip representation (scientific outside `[1e-5, 1e16)`),
/// empty for non-finite values.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        String::new()
    }
}
