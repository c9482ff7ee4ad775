//! Run manifests: the reproducibility record every subcommand writes.
//!
//! A manifest embeds the resolved study configuration and the arguments the
//! command actually used, so `--from-manifest` can replay the run and
//! produce byte-identical output files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nroy_core::wave::WaveStats;

use crate::config::StudyConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub tool_version: String,
    /// Subcommand that produced this run.
    pub command: String,
    /// The resolved study configuration, embedded for replay.
    pub study: StudyConfig,
    /// Command arguments relevant to reproduction, as `name -> value`.
    pub args: BTreeMap<String, String>,
    /// Seeds actually used, by role.
    pub seeds: BTreeMap<String, u64>,
    /// Output files by role, relative to the manifest's directory.
    pub outputs: BTreeMap<String, String>,
    /// Wave statistics, for `match` runs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub waves: Vec<WaveStats>,
    /// Free-form result summary entries (epsilon used, acceptance rates...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub summary: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, study: StudyConfig) -> Self {
        Self {
            version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            study,
            args: BTreeMap::new(),
            seeds: BTreeMap::new(),
            outputs: BTreeMap::new(),
            waves: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn arg(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.args.insert(name.into(), value.to_string());
        self
    }

    pub fn seed(&mut self, role: &str, value: u64) -> &mut Self {
        self.seeds.insert(role.into(), value);
        self
    }

    pub fn output(&mut self, role: &str, file_name: &str) -> &mut Self {
        self.outputs.insert(role.into(), file_name.into());
        self
    }

    pub fn save(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let manifest: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(CliError::Validation(format!(
                "unsupported manifest version {}",
                manifest.version
            )));
        }
        manifest.study.validate()?;
        Ok(manifest)
    }

    /// Typed accessor for a recorded argument.
    pub fn parsed_arg<T: std::str::FromStr>(&self, name: &str) -> CliResult<Option<T>> {
        match self.args.get(name) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::Validation(format!("manifest arg `{name}` = `{raw}` unparsable"))
            }),
        }
    }
}
