use std::io::Write;
use std::path::Path;

use super::LoadError;

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    /// Render as RFC 4180 CSV. Fails on a row whose arity differs from the header.
    pub fn to_csv_string(&self) -> Result<String, LoadError> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.header.len() {
                return Err(LoadError::Arity { header: self.header.len(), row: i, found: row.len() });
            }
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let csv_err = |e: csv::Error| LoadError::Usage(format!("csv encoding failed: {e}"));
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| LoadError::Usage(format!("csv encoding failed: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Floats with 9 significant digits in positional notation, e.g. `1.00000000`.
/// Magnitudes outside `[1e-9, 1e15)` fall back to scientific notation.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0.00000000".into();
    }
    let a = v.abs();
    if !(1e-9..1e15).contains(&a) {
        return format!("{v:.8e}");
    }
    // round first so that e.g. 9.999999999 picks the right exponent
    let sci = format!("{a:.8e}");
    let exp: i32 = sci.rsplit('e').next().unwrap().parse().unwrap();
    let decimals = (8 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Write the table to `path` atomically. Arity is checked before anything touches the disk.
pub fn write_csv(table: &Table, path: impl AsRef<Path>) -> Result<(), LoadError> {
    let text = table.to_csv_string()?;
    write_atomic(path.as_ref(), text.as_bytes())
}

/// Write via a temporary file in the destination directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LoadError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| LoadError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| LoadError::io(path, e))?;
    tmp.persist(path).map_err(|e| LoadError::io(path, e.error))?;
    Ok(())
}

/// Read a CSV with a header row into `(header, rows)` of raw strings.
pub fn read_csv_table(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<String>>), LoadError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| LoadError::Usage(format!("{}: {e}", path.display())))?;
    let header = reader
        .headers()
        .map_err(|e| LoadError::Usage(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| LoadError::Manifest { path: path.to_path_buf(), row: i + 1, message: e.to_string() })?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}
