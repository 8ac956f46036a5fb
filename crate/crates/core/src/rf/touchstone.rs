//! Touchstone v1.0 two-port files (`# HZ S RI R 50`).

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use super::{FrequencyGrid, TwoPortResponse, Z_REF};
use crate::error::{Error, Result};

pub const OPTION_LINE: &str = "# HZ S RI R 50";

/// Renders a response as Touchstone text, values at 9 significant digits.
/// Column order follows the v1.0 two-port convention: S11 S21 S12 S22.
pub fn to_string(resp: &TwoPortResponse, comments: &[&str]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "! {c}");
    }
    let _ = writeln!(out, "{OPTION_LINE}");
    for (i, f) in resp.grid.hz().iter().enumerate() {
        let _ = write!(out, "{f:.8e}");
        for v in [resp.s11[i], resp.s21[i], resp.s12[i], resp.s22[i]] {
            let _ = write!(out, " {:.8e} {:.8e}", v.re, v.im);
        }
        out.push('\n');
    }
    out
}

pub fn export_touchstone(resp: &TwoPortResponse, path: &Path) -> Result<()> {
    std::fs::write(path, to_string(resp, &["two-port S-parameters, real/imaginary"]))?;
    Ok(())
}

pub fn parse(text: &str) -> Result<TwoPortResponse> {
    let mut seen_option = false;
    let mut hz = Vec::new();
    let mut rows = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            let norm: Vec<String> = line.split_whitespace().map(|t| t.to_ascii_uppercase()).collect();
            let expected: Vec<&str> = OPTION_LINE.split_whitespace().collect();
            if norm.iter().map(String::as_str).ne(expected.iter().copied())
                && !(norm.len() == 6 && norm[..5] == ["#", "HZ", "S", "RI", "R"] && norm[5].parse::<f64>().ok() == Some(Z_REF))
            {
                return Err(Error::Parse { line: line_no, message: format!("unsupported option line '{line}'") });
            }
            seen_option = true;
            continue;
        }
        if !seen_option {
            return Err(Error::Parse { line: line_no, message: "data before option line".into() });
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        if vals.len() != 9 {
            return Err(Error::Parse { line: line_no, message: format!("expected 9 numbers, found {}", vals.len()) });
        }
        let c = |k: usize| Complex64::new(vals[k], vals[k + 1]);
        hz.push(vals[0]);
        rows.push([c(1), c(5), c(3), c(7)]);
    }
    let grid = FrequencyGrid::from_hz(&hz).map_err(|e| Error::Parse { line: 0, message: e.to_string() })?;
    Ok(TwoPortResponse::from_rows(&grid, rows))
}

pub fn import_touchstone(path: &Path) -> Result<TwoPortResponse> {
    parse(&std::fs::read_to_string(path)?)
}
