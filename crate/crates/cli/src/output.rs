//! Output-file helpers: header stamping and round-trip float formatting.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Metadata stamped into every output file.
pub struct FileMeta<'a> {
    pub schema: &'a str,
    pub config_hash: &'a str,
    pub seed: u64,
    pub command: &'a str,
}

impl FileMeta<'_> {
    /// `# key: value` comment header for CSV files.
    pub fn csv_header(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# schema: {}", self.schema);
        let _ = writeln!(s, "# tool_version: {TOOL_VERSION}");
        let _ = writeln!(s, "# command: {}", self.command);
        let _ = writeln!(s, "# config_hash: {}", self.config_hash);
        let _ = writeln!(s, "# seed: {}", self.seed);
        s
    }

    /// Meta object for JSON files.
    pub fn json_meta(&self) -> serde_json::Value {
        serde_json::json!({
            "tool_version": TOOL_VERSION,
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
        })
    }
}

/// Full round-trip precision (17 significant digits) for machine files.
pub fn fmt_full(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}

/// Six significant digits for human-readable reports.
pub fn fmt_human(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.6}")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("cannot create {}", parent.display()))?;
        }
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
