//! Result records and file emission: every command produces one
//! [`ResultRecord`] (JSON-serializable, loses nothing on a round trip), and
//! all file output goes through an atomic temp-file rename so partially
//! written artifacts can never be observed.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// The machine-readable outcome of one CLI invocation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultRecord {
    /// Which subcommand ran (kebab-case, e.g. "correlation-decay").
    pub command: String,
    /// Full echo of the effective configuration, seed included.
    pub config: serde_json::Value,
    /// Command-specific outputs.
    pub outputs: serde_json::Value,
    pub tool_version: String,
    pub wall_time_ms: f64,
    pub cache_hits: usize,
}

/// Write `bytes` to `path` atomically: the data lands under a temporary
/// name in the destination directory and is renamed into place, so readers
/// see either the old file or the complete new one.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| std::io::Error::other("output path has no file name"))?;
    let tmp = path.with_file_name(format!(
        "{}.tmp{}",
        file_name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

/// Render a CSV document with a `# key: value` configuration preamble, a
/// header line, and data rows. Fields containing commas must already be
/// quoted by the caller (see [`quote_field`]).
pub fn csv_document(config_echo: &[(String, String)], header: &str, rows: &[String]) -> String {
    let mut text = String::new();
    for (key, value) in config_echo {
        text.push_str(&format!("# {key}: {value}\n"));
    }
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    text
}

/// Quote a CSV field that may contain commas (doubling any inner quotes).
pub fn quote_field(raw: &str) -> String {
    format!("\"{}\"", raw.replace('"', "\"\""))
}
