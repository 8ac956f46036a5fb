//! Deterministic artifact writers: CSV tables, run manifests and gnuplot
//! scripts.
//!
//! Numbers are written with nine significant digits in a fixed scientific
//! format that does not depend on locale.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Nine significant digits, scientific notation.
pub fn fmt9(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.8e}")
    }
}

/// CSV text with a header row; every row must match the header width.
pub fn csv_string(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        debug_assert_eq!(r.len(), header.len());
        let cells: Vec<String> = r.iter().map(|&v| fmt9(v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Columns given as parallel vectors.
pub fn csv_columns(header: &[&str], cols: &[&[f64]]) -> String {
    let n = cols.first().map_or(0, |c| c.len());
    let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    csv_string(header, &rows)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Reproducibility record written next to every run's outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    /// `(file name, sha256)` of each output, in write order.
    pub outputs: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, config_bytes: &[u8], seed: Option<u64>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: sha256_hex(config_bytes),
            seed,
            outputs: Vec::new(),
        }
    }

    /// Writes `text` to `dir/name` and records its hash.
    pub fn emit(&mut self, dir: &Path, name: &str, text: &str) -> Result<()> {
        if name.contains('/') || name.contains('\\') || name == ".." {
            return Err(Error::Domain(format!("output name {name} must be a plain file name")));
        }
        write_text(&dir.join(name), text)?;
        self.outputs.push((name.into(), sha256_hex(text.as_bytes())));
        Ok(())
    }

    /// `key = value` lines; strings are quoted.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tool = \"{}\"", self.tool);
        let _ = writeln!(s, "version = \"{}\"", self.version);
        let _ = writeln!(s, "command = \"{}\"", self.command);
        let _ = writeln!(s, "config_sha256 = \"{}\"", self.config_sha256);
        match self.seed {
            Some(seed) => {
                let _ = writeln!(s, "seed = {seed}");
            }
            None => {
                let _ = writeln!(s, "seed = \"none\"");
            }
        }
        for (name, hash) in &self.outputs {
            let _ = writeln!(s, "output.\"{name}\" = \"{hash}\"");
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join("manifest.txt"), &self.render())
    }
}

/// Gnuplot script plotting columns of a CSV file against its first column.
pub fn gnuplot_script(csv_name: &str, title: &str, xlabel: &str, ylabel: &str, columns: &[(usize, &str)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set title \"{title}\"");
    let _ = writeln!(s, "set xlabel \"{xlabel}\"");
    let _ = writeln!(s, "set ylabel \"{ylabel}\"");
    let plots: Vec<String> = columns
        .iter()
        .map(|(c, label)| format!("'{csv_name}' using 1:{c} with lines title \"{label}\""))
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}
