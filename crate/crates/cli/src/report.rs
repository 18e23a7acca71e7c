//! Report bundles: a directory holding `manifest.toml`, CSV tables and
//! line-delimited records, every file written atomically.

use std::path::{Path, PathBuf};

use cll_core::grid::io::save_field;
use cll_core::grid::ComplexField;
use cll_core::io::{to_manifest, to_records, write_atomic};
use serde::Serialize;

use crate::error::{CliError, Diagnostic};

#[derive(Debug, Clone)]
pub struct Bundle {
    dir: PathBuf,
}

/// Self-describing run manifest; the config is embedded verbatim.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub status: &'static str,
    pub config: &'a str,
    pub summary: toml::Value,
}

impl Bundle {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn bytes(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        Ok(write_atomic(&self.path(name), bytes)?)
    }

    pub fn text(&self, name: &str, text: &str) -> Result<(), CliError> {
        self.bytes(name, text.as_bytes())
    }

    pub fn field(&self, name: &str, f: &ComplexField) -> Result<(), CliError> {
        Ok(save_field(f, &self.path(name))?)
    }

    pub fn records<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<(), CliError> {
        self.text(name, &to_records(rows)?)
    }

    pub fn manifest(&self, m: &RunManifest) -> Result<(), CliError> {
        self.text("manifest.toml", &to_manifest(m)?)
    }

    pub fn diagnostic(&self, d: &Diagnostic) -> Result<(), CliError> {
        self.records("diagnostic.jsonl", std::slice::from_ref(d))
    }
}
