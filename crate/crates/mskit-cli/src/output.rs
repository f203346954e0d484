//! Error classification, file emission and JSON helpers shared by the commands.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

/// A command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent arguments (exit code 2).
    #[error("{0}")]
    Usage(String),
    /// A computation, validation or I/O step failed (exit code 1).
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// The process exit code for this failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<mskit::Error> for CliError {
    fn from(e: mskit::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Reads a whole file, mapping failures to exit code 1.
pub fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Failed(format!("cannot read {}: {e}", path.display())))
}

/// Writes `text` to `out`, or to stdout when no path is given.
pub fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Pretty-printed JSON followed by a newline.
pub fn json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// A JSON array with one compact element per line.
pub fn json_lines<T: Serialize>(items: &[T]) -> String {
    if items.is_empty() {
        return "[]\n".into();
    }
    let body: Vec<String> =
        items.iter().map(|x| format!("  {}", serde_json::to_string(x).expect("report types serialize"))).collect();
    format!("[\n{}\n]\n", body.join(",\n"))
}

/// A complex number as a JSON object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JsonComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for JsonComplex {
    fn from(z: Complex64) -> Self {
        // `+ 0.0` turns a negative zero into a positive one.
        JsonComplex { re: z.re + 0.0, im: z.im + 0.0 }
    }
}

/// `x` rendered by the shortest round-trip representation, with `-0` as `0`.
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x:?}")
    }
}
