//! Atomic file output and small readers for the interchange formats.

use std::fs;
use std::io::Write;
use std::path::Path;

use plstat_core::data::read_numeric_csv;

use crate::error::{CliError, CliResult, UserContext};

/// Writes `contents` to `path` through a temporary file in the same
/// directory, renamed into place once complete.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let fail = |e: &dyn std::fmt::Display| CliError::internal("write", format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| fail(&e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| fail(&e))?;
    tmp.write_all(contents).map_err(|e| fail(&e))?;
    tmp.as_file().sync_all().map_err(|e| fail(&e))?;
    tmp.persist(path).map_err(|e| fail(&e.error))?;
    Ok(())
}

pub fn read_text(path: &Path, stage: &str) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::user(stage, format!("{}: {e}", path.display())))
}

/// Reads a column of numbers: the last field of every data row, skipping a
/// non-numeric header.
pub fn read_values(path: &Path, stage: &str) -> CliResult<Vec<f64>> {
    let text = read_text(path, stage)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or("").trim();
        match plstat_core::data::parse_f64(last) {
            Some(v) => values.push(v),
            None if i == 0 => continue,
            None => {
                return Err(CliError::user(
                    stage,
                    format!("{}:{}: not a number: {last:?}", path.display(), i + 1),
                ))
            }
        }
    }
    Ok(values)
}

/// Reads a numeric table (header optional).
pub fn read_table(path: &Path, stage: &str) -> CliResult<Vec<Vec<f64>>> {
    let file = fs::File::open(path).map_err(|e| CliError::user(stage, format!("{}: {e}", path.display())))?;
    read_numeric_csv(file).user_ctx(stage)
}
