use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

const STAGING: &str = ".nbrw-partial";

/// Output directory with all-or-nothing semantics: files are written to a
/// staging subdirectory and moved into place by [`OutputDir::commit`].
/// Dropping an uncommitted directory removes everything it wrote.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    staging: PathBuf,
    created_root: bool,
    files: Vec<String>,
    committed: bool,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        let created_root = !root.exists();
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        let staging = root.join(STAGING);
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| io_err(&staging, e))?;
        }
        fs::create_dir(&staging).map_err(|e| io_err(&staging, e))?;
        Ok(OutputDir { root: root.to_path_buf(), staging, created_root, files: Vec::new(), committed: false })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Names of the files written so far.
    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn target(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.staging.join(name)
    }

    /// Writes `rows` with a header derived from the row type. Floats are
    /// written in shortest round-trip form.
    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let path = self.target(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        for r in rows {
            w.serialize(r).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))
    }

    /// Pretty JSON. Object keys come out sorted because `serde_json::Map`
    /// is ordered.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.target(name);
        let v = serde_json::to_value(value).map_err(|e| io_err(&path, e))?;
        let mut text = serde_json::to_string_pretty(&v).map_err(|e| io_err(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_err(&path, e))
    }

    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let mut out = Vec::with_capacity(self.files.len());
        for f in &self.files {
            let dest = self.root.join(f);
            fs::rename(self.staging.join(f), &dest).map_err(|e| io_err(&dest, e))?;
            out.push(dest);
        }
        fs::remove_dir_all(&self.staging).map_err(|e| io_err(&self.staging, e))?;
        self.committed = true;
        Ok(out)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        let _ = fs::remove_dir_all(&self.staging);
        if self.created_root {
            // only succeeds if nothing else landed there
            let _ = fs::remove_dir(&self.root);
        }
    }
}
