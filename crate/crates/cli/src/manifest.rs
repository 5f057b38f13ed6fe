//! Run manifests: the resolved settings of a run plus content hashes of
//! every file it read and wrote.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.txt";

/// Git-style object hash: SHA-256 over `blob <len>\0<content>`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(content_hash(&bytes))
}

#[derive(Debug, Default)]
pub struct Manifest {
    command: String,
    settings: Vec<(String, String)>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self { command: command.to_owned(), ..Default::default() }
    }

    pub fn setting(&mut self, key: impl Into<String>, value: impl ToString) {
        self.settings.push((key.into(), value.to_string()));
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    /// Hashes the recorded files and writes `manifest.txt` into `out_dir`.
    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let mut s = String::new();
        writeln!(s, "command = {}", self.command)?;
        writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(s, "\n[settings]")?;
        for (k, v) in &self.settings {
            writeln!(s, "{k} = {v}")?;
        }
        for (title, files) in [("inputs", &self.inputs), ("outputs", &self.outputs)] {
            writeln!(s, "\n[{title}]")?;
            for f in files {
                writeln!(s, "{}  {}", file_hash(f)?, f.display())?;
            }
        }
        let path = out_dir.join(FILE_NAME);
        fs::write(&path, s).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
