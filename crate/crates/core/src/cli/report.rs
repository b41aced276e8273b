//! JSON and CSV report files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Command, ExperimentConfig, Format};

pub const SCHEMA_VERSION: u32 = 1;

/// A finished command: the JSON document, an optional CSV projection and a
/// one-line summary for the terminal.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: Command,
    pub json: Value,
    pub csv: Option<String>,
    pub summary: String,
}

impl Report {
    pub(crate) fn new(command: Command, cfg: &ExperimentConfig) -> Self {
        Report {
            command,
            json: json!({
                "schema_version": SCHEMA_VERSION,
                "command": command.as_str(),
                "seed": cfg.seed,
                "system": cfg.system,
                "parameters": cfg.params,
            }),
            csv: None,
            summary: String::new(),
        }
    }

    pub(crate) fn with_result<T: Serialize>(mut self, result: &T, summary: String) -> Self {
        // non-finite floats have no JSON form and become null
        self.json["result"] = serde_json::to_value(result).unwrap_or(Value::Null);
        self.summary = summary;
        self
    }

    pub(crate) fn with_csv(mut self, header: &[&str], rows: Vec<Vec<String>>) -> Self {
        let mut s = header.join(",");
        s.push('\n');
        for r in rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        self.csv = Some(s);
        self
    }

    pub fn json_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.json).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes `<command>.json` and, when requested and tabular,
    /// `<command>.csv` into `dir`.
    pub fn write(
        &self,
        dir: &Path,
        formats: &[Format],
    ) -> Result<Vec<PathBuf>, (PathBuf, std::io::Error)> {
        fs::create_dir_all(dir).map_err(|e| (dir.to_path_buf(), e))?;
        let mut out = Vec::new();
        let path = dir.join(format!("{}.json", self.command.as_str()));
        fs::write(&path, self.json_text()).map_err(|e| (path.clone(), e))?;
        out.push(path);
        if let (true, Some(csv)) = (formats.contains(&Format::Csv), &self.csv) {
            let path = dir.join(format!("{}.csv", self.command.as_str()));
            fs::write(&path, csv).map_err(|e| (path.clone(), e))?;
            out.push(path);
        }
        Ok(out)
    }
}

/// `{"schema_version": 1, "error": record}` on one line.
pub fn error_json<T: Serialize>(record: &T) -> String {
    json!({ "schema_version": SCHEMA_VERSION, "error": record }).to_string()
}
