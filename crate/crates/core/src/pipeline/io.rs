use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord, Trim, WriterBuilder};
use sha2::{Digest, Sha256};

use super::manifest::FileDigest;
use super::PipelineError;

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, PipelineError> {
    std::fs::read(path).map_err(|e| PipelineError::io(path, e))
}

/// A delimited file held in memory with its header and source line numbers.
pub(crate) struct DelimitedFile {
    path: PathBuf,
    headers: Vec<String>,
    rows: Vec<(u64, StringRecord)>,
}

impl DelimitedFile {
    pub fn parse(path: &Path, bytes: &[u8]) -> Result<Self, PipelineError> {
        let mut reader = ReaderBuilder::new().trim(Trim::All).from_reader(bytes);
        let headers = reader
            .headers()
            .map_err(|e| input(path, None, &e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line());
                input(path, line, &e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Self {
            path: path.to_path_buf(),
            headers,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Result<usize, PipelineError> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| {
            input(
                &self.path,
                Some(1),
                &format!("missing column {name:?} (header: {})", self.headers.join(",")),
            )
        })
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> {
        self.rows.iter().map(move |(line, rec)| Row {
            path: &self.path,
            headers: &self.headers,
            line: *line,
            rec,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }
}

pub(crate) struct Row<'a> {
    path: &'a Path,
    headers: &'a [String],
    pub line: u64,
    rec: &'a StringRecord,
}

impl Row<'_> {
    pub fn text(&self, col: usize) -> &str {
        self.rec.get(col).unwrap_or("")
    }

    pub fn key(&self, col: usize) -> Result<String, PipelineError> {
        let v = self.text(col);
        if v.is_empty() {
            return Err(self.error(&format!("column {:?} is empty", self.headers[col])));
        }
        Ok(v.to_string())
    }

    pub fn parse<T: std::str::FromStr>(&self, col: usize) -> Result<T, PipelineError> {
        self.text(col).parse().map_err(|_| {
            self.error(&format!(
                "column {:?}: cannot parse {:?}",
                self.headers[col],
                self.text(col)
            ))
        })
    }

    pub fn real(&self, col: usize) -> Result<f64, PipelineError> {
        let v: f64 = self.parse(col)?;
        if !v.is_finite() {
            return Err(self.error(&format!("column {:?}: non-finite value", self.headers[col])));
        }
        Ok(v)
    }

    pub fn error(&self, msg: &str) -> PipelineError {
        input(self.path, Some(self.line), msg)
    }
}

fn input(path: &Path, line: Option<u64>, msg: &str) -> PipelineError {
    match line {
        Some(l) => PipelineError::Input(format!("{}:{l}: {msg}", path.display())),
        None => PipelineError::Input(format!("{}: {msg}", path.display())),
    }
}

/// Header plus rows rendered as CSV bytes.
pub(crate) fn csv_bytes<I, R>(header: &[String], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub(crate) fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// Output directory writer that remembers what it wrote.
pub(crate) struct OutputDir {
    root: PathBuf,
    written: Vec<FileDigest>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, PipelineError> {
        std::fs::create_dir_all(root).map_err(|e| PipelineError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, PipelineError> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|e| PipelineError::io(&path, e))?;
        self.written.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_json<T: serde::Serialize>(
        &mut self,
        name: &str,
        value: &T,
    ) -> Result<PathBuf, PipelineError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable record");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn written(&self) -> &[FileDigest] {
        &self.written
    }
}
