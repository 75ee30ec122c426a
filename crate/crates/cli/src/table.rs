//! CSV tables with `#` provenance headers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Header comment block written at the top of every output file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub command: String,
    pub master_seed: Option<u64>,
    pub realizations: Option<usize>,
    /// `# param: name = value` lines; read back by `analyze`.
    pub params: Vec<(String, String)>,
    /// Free-form `# ...` lines (diagnostics, unit annotations).
    pub notes: Vec<String>,
    pub config: Option<String>,
}

impl Provenance {
    fn lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("felsim {VERSION}"),
            format!("command: {}", self.command),
        ];
        if let Some(seed) = self.master_seed {
            out.push(format!("master_seed: {seed}"));
        }
        if let Some(n) = self.realizations {
            out.push(format!("realizations: {n}"));
        }
        for (k, v) in &self.params {
            out.push(format!("param: {k} = {v}"));
        }
        out.extend(self.notes.iter().cloned());
        if let Some(cfg) = &self.config {
            out.push("config:".into());
            out.extend(cfg.lines().map(|l| format!("  {l}")));
        }
        out
    }
}

/// A table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    /// A value that does not exist (e.g. the FWHM of a missing peak).
    Absent,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Absent, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(i64::from(v))
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

/// 17 significant digits, so every `f64` survives a round trip.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_f64(*v),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Absent => String::new(),
        }
    }
}

pub fn write_table(
    path: &Path,
    prov: &Provenance,
    columns: &[&str],
    rows: &[Vec<Cell>],
) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut file =
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    for line in prov.lines() {
        writeln!(file, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(columns)?;
    for row in rows {
        if row.len() != columns.len() {
            bail!("row has {} cells, expected {}", row.len(), columns.len());
        }
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(())
}

/// A table read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Comment lines without the leading `# `.
    pub comments: Vec<String>,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Numeric column; empty cells read as NaN.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .column_index(name)
            .with_context(|| format!("no column '{name}'"))?;
        self.numeric(i)
    }

    pub fn numeric(&self, i: usize) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let cell = row[i].trim();
                if cell.is_empty() {
                    return Ok(f64::NAN);
                }
                cell.parse::<f64>().with_context(|| {
                    format!(
                        "row {}, column '{}': not a number: '{cell}'",
                        r + 1,
                        self.headers[i]
                    )
                })
            })
            .collect()
    }

    /// Value of a `# param: name = value` line.
    pub fn param(&self, name: &str) -> Option<&str> {
        self.comments.iter().find_map(|c| {
            let (k, v) = c.strip_prefix("param: ")?.split_once(" = ")?;
            (k == name).then_some(v)
        })
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let comments = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| {
            l.trim_start_matches('#')
                .strip_prefix(' ')
                .unwrap_or(l.trim_start_matches('#'))
                .to_owned()
        })
        .collect();
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = r.headers()?.iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_owned).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(Table {
        comments,
        headers,
        rows,
    })
}

/// `dir/name.ext` becomes `dir/name.<tag>.ext` (extension `csv` if none).
pub fn sibling(path: &Path, tag: &str) -> PathBuf {
    if tag.is_empty() {
        return path.to_owned();
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    path.with_file_name(format!("{stem}.{tag}.{ext}"))
}

/// Path of the status sidecar of an output file.
pub fn status_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".status");
    out.with_file_name(name)
}

/// Outcome of one command: files written and problems that did not abort it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    /// Write the sidecar next to `out`.
    pub fn write_status(&self, out: &Path) -> Result<PathBuf> {
        let path = status_path(out);
        let mut text = format!(
            "status: {}\n",
            if self.is_complete() {
                "complete"
            } else {
                "partial"
            }
        );
        for f in &self.files {
            text.push_str(&format!("file: {}\n", f.display()));
        }
        for w in &self.warnings {
            text.push_str(&format!("warning: {w}\n"));
        }
        for f in &self.failures {
            text.push_str(&format!("failure: {f}\n"));
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
