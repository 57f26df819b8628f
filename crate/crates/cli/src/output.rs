//! File writers. Every CSV has a header row, comma separators and '.'
//! decimals; floats use the shortest round-trip form.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

pub fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok((path, BufWriter::new(file)))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let (path, mut out) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush().with_context(|| format!("cannot write {}", path.display()))
}

/// Header plus rows of already formatted cells.
pub fn write_table(dir: &Path, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let (path, mut out) = create(dir, name)?;
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush().with_context(|| format!("cannot write {}", path.display()))
}

/// Keeps free text inside one CSV cell.
pub fn cell_text(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

pub fn strings<I: IntoIterator<Item = S>, S: ToString>(items: I) -> Vec<String> {
    items.into_iter().map(|s| s.to_string()).collect()
}
