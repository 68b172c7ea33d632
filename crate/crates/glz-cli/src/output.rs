//! CSV and manifest emission.
//!
//! Every CSV starts with `#`-prefixed `key: value` echo lines followed by a
//! `# columns:` line, so each file is self-describing and the echo
//! round-trips into a config fragment.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub status: String,
    pub wall_ms: u128,
    pub files: Vec<FileRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub samples: usize,
    pub version: &'static str,
    pub unix_time: u64,
    pub scenarios: Vec<ScenarioReport>,
}

pub fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Shortest-round-trip rendering, switching to exponent form where plain
/// decimal would drag a train of zeros.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-4 && v.abs() < 1e7) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Write one CSV with echo header. `echo` pairs become `# key: value`
/// lines; rows are pre-rendered comma strings.
pub fn write_csv(
    path: &Path,
    echo: &[(String, String)],
    columns: &str,
    rows: &[String],
) -> Result<FileRecord> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut buf = String::new();
    for (k, v) in echo {
        buf.push_str(&format!("# {k}: {v}\n"));
    }
    buf.push_str(&format!("# columns: {columns}\n"));
    for row in rows {
        buf.push_str(row);
        buf.push('\n');
    }
    let mut file =
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    file.write_all(buf.as_bytes())?;
    let mut hasher = Sha256::new();
    hasher.update(buf.as_bytes());
    Ok(FileRecord {
        path: path.display().to_string(),
        sha256: format!("{:x}", hasher.finalize()),
        bytes: buf.len() as u64,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<FileRecord> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    Ok(FileRecord {
        path: path.display().to_string(),
        sha256: format!("{:x}", hasher.finalize()),
        bytes: text.len() as u64,
    })
}

/// Collects emitted files for one scenario; on failure every file written
/// so far is removed so no partial state survives.
pub struct Emitter {
    pub dir: PathBuf,
    files: Vec<FileRecord>,
    start: Instant,
    name: String,
}

impl Emitter {
    pub fn new(root: &Path, name: &str) -> Self {
        Self {
            dir: root.join(name),
            files: Vec::new(),
            start: Instant::now(),
            name: name.to_string(),
        }
    }

    pub fn csv(
        &mut self,
        file: &str,
        echo: &[(String, String)],
        columns: &str,
        rows: &[String],
    ) -> Result<()> {
        let rec = write_csv(&self.dir.join(file), echo, columns, rows)?;
        self.files.push(rec);
        Ok(())
    }

    pub fn finish(mut self) -> Result<ScenarioReport> {
        let report = ScenarioReport {
            name: self.name.clone(),
            status: "ok".into(),
            wall_ms: self.start.elapsed().as_millis(),
            files: std::mem::take(&mut self.files),
            error: None,
        };
        let manifest_path = self.dir.join("manifest.json");
        write_json(&manifest_path, &report)?;
        Ok(report)
    }

    /// Remove everything written so far (failure path).
    pub fn abort(self) {
        for f in &self.files {
            std::fs::remove_file(&f.path).ok();
        }
        std::fs::remove_dir(&self.dir).ok(); // only if now empty
    }
}
