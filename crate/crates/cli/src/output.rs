use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// A created, writable output directory.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(path: &Path) -> CliResult<Self> {
        fs::create_dir_all(path)
            .map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", path.display())))?;
        Ok(Self {
            root: path.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn join(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> CliResult<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(CliError::io(&path))?;
        Ok(path)
    }

    pub fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.into()))?;
        self.write(name, text + "\n")
    }

    pub fn subdir(&self, name: &str) -> CliResult<OutDir> {
        OutDir::create(&self.root.join(name))
    }
}

/// Comma-separated rows; `f64` values use the shortest round-trip form.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
