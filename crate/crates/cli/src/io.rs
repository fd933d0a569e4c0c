//! Deterministic text outputs: CSV tables, field rasters, PGM images and the
//! field file format.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use harvest_core::grid::{Domain, ScalarField};

use crate::error::CliError;

/// 12 significant digits.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.11e}")
    }
}

/// 4 significant digits, for the stdout summary.
pub fn sig4(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.000".into();
    }
    let e = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&e) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - e).max(0) as usize;
    let sign = if x < 0.0 { "-" } else { "" };
    let a = x.abs();
    let s = format!("{a:.decimals$}");
    // Rounding can carry into a new digit (9.9996 -> 10.000).
    let digits = s.chars().filter(|c| c.is_ascii_digit()).skip_while(|&c| c == '0').count();
    if digits > 4 && decimals > 0 {
        let d = decimals - 1;
        return format!("{sign}{a:.d$}");
    }
    format!("{sign}{s}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    write_text(path, &s)
}

/// `x,value` (1-D) or `x,y,value` (2-D), one line per node.
pub fn write_raster(path: &Path, field: &ScalarField) -> Result<(), CliError> {
    let d = field.domain();
    let mut s = String::from(if d.dim() == 2 { "x,y,value\n" } else { "x,value\n" });
    for (i, v) in field.values().iter().enumerate() {
        let c = d.coords(i);
        if d.dim() == 2 {
            let _ = writeln!(s, "{},{},{}", num(c[0]), num(c[1]), num(*v));
        } else {
            let _ = writeln!(s, "{},{}", num(c[0]), num(*v));
        }
    }
    write_text(path, &s)
}

/// Plain (P2) 16-bit greyscale image of a 2-D field, `y` pointing up.
pub fn write_pgm(path: &Path, field: &ScalarField) -> Result<(), CliError> {
    let d = field.domain();
    if d.dim() != 2 {
        return Ok(());
    }
    let (nx, ny) = (d.resolution()[0], d.resolution()[1]);
    let (lo, hi) = (field.min(), field.max());
    let scale = if hi > lo { 65535.0 / (hi - lo) } else { 0.0 };
    let mut s = format!("P2\n# min {} max {}\n{nx} {ny}\n65535\n", num(lo), num(hi));
    for j in (0..ny).rev() {
        let row: Vec<String> = (0..nx)
            .map(|i| {
                let v = field.values()[d.flat_index([i, j])];
                (((v - lo) * scale).round() as u32).to_string()
            })
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    write_text(path, &s)
}

/// Header line followed by one value per line, `x` fastest.
pub fn write_field(path: &Path, field: &ScalarField) -> Result<(), CliError> {
    let mut s = field.domain().header();
    s.push('\n');
    for v in field.values() {
        let _ = writeln!(s, "{v:e}");
    }
    write_text(path, &s)
}

pub fn read_field(path: &Path, domain: &Arc<Domain>) -> Result<ScalarField, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().unwrap_or("").trim();
    if !same_header(header, &domain.header()) {
        return Err(CliError::config(
            "field",
            format!("{}: header '{header}' does not match the domain '{}'", path.display(), domain.header()),
        ));
    }
    let values = lines
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| CliError::config("field", format!("{}: value {}: {e}", path.display(), i + 1)))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    ScalarField::new(domain.clone(), values).map_err(|e| CliError::config("field", format!("{}: {e}", path.display())))
}

/// Compares headers token by token, lengths numerically.
fn same_header(a: &str, b: &str) -> bool {
    let ta: Vec<&str> = a.split_whitespace().collect();
    let tb: Vec<&str> = b.split_whitespace().collect();
    if ta.len() != 5 || tb.len() != 5 || ta[..3] != tb[..3] || ta[4] != tb[4] {
        return false;
    }
    let parse = |s: &str| s.split(',').map(|x| x.parse::<f64>()).collect::<Result<Vec<_>, _>>();
    match (parse(ta[3]), parse(tb[3])) {
        (Ok(x), Ok(y)) => x.len() == y.len() && x.iter().zip(&y).all(|(p, q)| (p - q).abs() <= 1e-12 * q.abs()),
        _ => false,
    }
}

/// Output directory that records the files written into it.
pub struct OutDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<OutDir, CliError> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}
