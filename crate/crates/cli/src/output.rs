use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use bellcontext_core::Error;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError { code: EXIT_RUNTIME, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_config() { EXIT_CONFIG } else { EXIT_RUNTIME };
        CliError { code, message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Reads an input file; a missing or unreadable input is a configuration problem.
pub fn read_input(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects output files and writes them with a `run.json` sidecar describing the run.
pub struct Run {
    dir: PathBuf,
    subcommand: &'static str,
    spec: Value,
    seed: Option<u64>,
    files: Vec<(String, String)>,
}

impl Run {
    pub fn new<S: Serialize>(dir: &Path, subcommand: &'static str, spec: &S, seed: Option<u64>) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
        let spec = serde_json::to_value(spec).map_err(|e| CliError::runtime(e.to_string()))?;
        Ok(Run { dir: dir.to_path_buf(), subcommand, spec, seed, files: Vec::new() })
    }

    fn record(&mut self, name: &str) -> CliResult<()> {
        let bytes = fs::read(self.dir.join(name)).map_err(|e| CliError::runtime(e.to_string()))?;
        self.files.push((name.to_string(), hex_sha256(&bytes)));
        Ok(())
    }

    /// Streams a file through `write`, then records its hash.
    pub fn write_with<F>(&mut self, name: &str, write: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<fs::File>) -> bellcontext_core::Result<()>,
    {
        let path = self.dir.join(name);
        let file = fs::File::create(&path).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        write(&mut w).map_err(|e| CliError::runtime(e.to_string()))?;
        drop(w);
        self.record(name)
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::runtime(e.to_string()))?;
        text.push('\n');
        fs::write(self.dir.join(name), text).map_err(|e| CliError::runtime(e.to_string()))?;
        self.record(name)
    }

    /// Embeds spec, seed, version and output hashes; written last.
    pub fn finish(self) -> CliResult<()> {
        let spec_text = serde_json::to_string(&self.spec).map_err(|e| CliError::runtime(e.to_string()))?;
        let files: serde_json::Map<String, Value> = self.files.into_iter().map(|(n, h)| (n, Value::String(h))).collect();
        let meta = json!({
            "tool": "bellctx",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": self.subcommand,
            "seed": self.seed,
            "spec": self.spec,
            "spec_sha256": hex_sha256(spec_text.as_bytes()),
            "outputs_sha256": files,
        });
        let mut text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::runtime(e.to_string()))?;
        text.push('\n');
        fs::write(self.dir.join("run.json"), text).map_err(|e| CliError::runtime(e.to_string()))
    }

    /// Metadata fragment to embed in summaries.
    pub fn header(&self) -> Value {
        json!({
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "spec": self.spec,
        })
    }
}
