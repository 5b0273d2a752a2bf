use std::path::Path;
use std::time::Instant;

use super::CliError;
use crate::io::{write_file, IoError};

/// Everything needed to rerun a subcommand, written as `manifest.txt` next
/// to its outputs.
pub struct RunManifest {
    started: Instant,
    entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        let mut m = Self { started: Instant::now(), entries: Vec::new() };
        m.add("tool", concat!("maxplus ", env!("CARGO_PKG_VERSION")));
        m.add("command", command);
        m
    }

    pub fn add(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn add_all(&mut self, prefix: &str, entries: &[(String, String)]) {
        for (k, v) in entries {
            self.add(&format!("{prefix}.{k}"), v);
        }
    }

    pub fn add_path(&mut self, key: &str, path: &Path) {
        self.add(key, path.display());
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str(&format!("duration_seconds = {:.3}\n", self.started.elapsed().as_secs_f64()));
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_file(&dir.join("manifest.txt"), self.render().as_bytes()).map_err(CliError::from)
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|source| CliError::from(IoError::File { path: dir.to_path_buf(), source }))
}
