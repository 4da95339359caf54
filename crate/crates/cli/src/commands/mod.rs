pub mod crlb;
pub mod identify;
pub mod montecarlo;
pub mod simulate;

use std::path::PathBuf;

use wnsf::{Error, Result};

use crate::config::FileConfig;

/// Schema version stamped into every JSON artifact this binary writes.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// A path that must come from either the flag or the manifest.
fn require_path(flag: Option<PathBuf>, file: &FileConfig, key: &str) -> Result<PathBuf> {
    flag.or_else(|| file.string(key).map(PathBuf::from))
        .ok_or_else(|| Error::InvalidArgument(format!("missing required --{key} PATH")))
}

/// Pretty-printed JSON with a trailing newline, to a file or stdout.
fn write_json<T: serde::Serialize>(value: &T, output: Option<&std::path::Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("report serialization: {e}")))?;
    text.push('\n');
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}
