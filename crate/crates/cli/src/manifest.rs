use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};
use crate::output::{read_file, OutDir};

pub const MANIFEST: &str = "manifest.json";

/// Written last into every output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub dataset_digest: String,
    pub seed: Option<u64>,
    pub params: Value,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(
        command: &str,
        argv: &[String],
        dataset_digest: &str,
        seed: Option<u64>,
        params: Value,
        started: String,
    ) -> Self {
        Self {
            command: command.into(),
            argv: argv.to_vec(),
            dataset_digest: dataset_digest.into(),
            seed,
            params,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            started,
            finished: String::new(),
        }
    }

    pub fn write(mut self, out: &OutDir) -> Result<()> {
        self.finished = now();
        out.write_json(MANIFEST, &serde_json::to_value(&self).expect("manifest serializes"))
    }

    pub fn read(dir: &std::path::Path) -> Result<Self> {
        let p = dir.join(MANIFEST);
        serde_json::from_str(&read_file(&p)?).map_err(|e| CliError::BadResults { path: p, message: e.to_string() })
    }
}
