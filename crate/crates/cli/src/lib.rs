//! Pipeline commands and the HTTP API behind the `scriptorium` binary.

pub mod commands;
pub mod config;
pub mod server;

use std::fmt;
use std::path::Path;

use serde::Serialize;

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_PIPELINE: i32 = 4;

impl CliError {
    pub fn usage(message: impl fmt::Display) -> CliError {
        CliError { code: EXIT_USAGE, message: message.to_string() }
    }

    pub fn io(message: impl fmt::Display) -> CliError {
        CliError { code: EXIT_IO, message: message.to_string() }
    }

    pub fn pipeline(message: impl fmt::Display) -> CliError {
        CliError { code: EXIT_PIPELINE, message: message.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// Pretty JSON with a trailing newline; every JSON artifact goes through
/// here so that files and HTTP responses are byte-identical.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

pub fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    String::from_utf8(read_file(path)?).map_err(|_| CliError::io(format!("{} is not UTF-8 text", path.display())))
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}
