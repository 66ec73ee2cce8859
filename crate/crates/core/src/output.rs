//! Fixed-format CSV writing shared by all result files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;

/// `# key=value` lines written above a CSV header.
pub type Meta = Vec<(String, String)>;

/// Nine significant digits in scientific notation.
pub fn fmt(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Creates `path` and hands a buffered writer to `body`, flushing afterwards.
pub fn write_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}
