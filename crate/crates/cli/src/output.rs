use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use randset::geometry::{fmt_f64, write_pgm, Grid};

/// Metadata shared by every file of one run.
pub struct Header {
    pub command: &'static str,
    pub seed: u64,
    pub config: String,
}

impl Header {
    pub fn lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("randset {}", env!("CARGO_PKG_VERSION")),
            format!("command: {}", self.command),
            format!("master_seed: {}", self.seed),
            "config:".to_string(),
        ];
        lines.extend(self.config.lines().map(|l| format!("  {l}")));
        lines
    }
}

/// A CSV table whose cells are already formatted.
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, header: &Header, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for line in header.lines() {
            writeln!(out, "# {line}")?;
        }
        {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
            w.write_record(&self.columns)?;
            for row in &self.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        fs::write(path, out).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn num(x: f64) -> String {
    fmt_f64(x)
}

pub fn int(x: impl ToString) -> String {
    x.to_string()
}

pub fn write_graymap(grid: &Grid, header: &Header, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    write_pgm(grid, &header.lines(), &mut out)?;
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn prepare(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.to_path_buf())
}
