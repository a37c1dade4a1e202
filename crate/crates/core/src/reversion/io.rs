use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::ReversionResult;
use crate::error::Result;

impl ReversionResult {
    /// One row per pixel with the real and imaginary parts of every term.
    pub fn terms_csv(&self) -> String {
        let mut out = String::from("pixel");
        for k in 1..=self.terms.len() {
            let _ = write!(out, ",F{k}_re,F{k}_im");
        }
        out.push('\n');
        let n = self.terms.first().map_or(0, Vec::len);
        for p in 0..n {
            let _ = write!(out, "{p}");
            for term in &self.terms {
                let _ = write!(out, ",{},{}", term[p].re, term[p].im);
            }
            out.push('\n');
        }
        out
    }

    /// Writes `terms.csv` and `diagnostics.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("terms.csv"), self.terms_csv())?;
        fs::write(
            dir.join("diagnostics.json"),
            serde_json::to_string_pretty(&self.diagnostics)?,
        )?;
        Ok(())
    }
}
