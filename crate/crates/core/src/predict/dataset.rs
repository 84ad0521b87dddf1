//! Font dataset files: UTF-8 CSV with header
//! `name[,provenance],attr_0..attr_36[,emb_0..emb_199]`.
//!
//! The attribute block and the embedding block are each optional as a
//! whole (embedding-only files describe fonts awaiting extension;
//! attribute-only files have no embeddings), but when a block is present
//! its column count must be exact. Embedding cells may be left empty on
//! individual rows to mark records without an embedding. Numbers use `.`
//! as the decimal point and no thousands separators.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use super::{
    EmbeddingOnlyFont, FontRecord, PredictError, Provenance, ATTRIBUTE_DIM, EMBEDDING_DIM,
};

#[derive(Debug)]
pub enum DatasetError {
    Io(io::Error),
    /// Parse failure; `line` is 1-based (line 1 is the header).
    Parse { line: usize, message: String },
    InvalidRecord(String),
}

impl fmt::Display for DatasetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetError::Io(e) => write!(f, "dataset i/o error: {e}"),
            DatasetError::Parse { line, message } => write!(f, "line {line}: {message}"),
            DatasetError::InvalidRecord(msg) => write!(f, "invalid record: {msg}"),
        }
    }
}

impl std::error::Error for DatasetError {}

impl From<io::Error> for DatasetError {
    fn from(e: io::Error) -> Self {
        DatasetError::Io(e)
    }
}

/// One parsed CSV row; which blocks are present depends on the header.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedFont {
    pub name: String,
    pub provenance: Option<Provenance>,
    pub attributes: Option<Vec<f64>>,
    pub embedding: Option<Vec<f64>>,
    /// Source line, for error reporting.
    pub line: usize,
}

impl ParsedFont {
    /// Complete record with attributes (provenance defaults to seed).
    pub fn into_font_record(self) -> Result<FontRecord, DatasetError> {
        let line = self.line;
        let attributes = self.attributes.ok_or(DatasetError::Parse {
            line,
            message: format!("font {:?} has no attribute columns", self.name),
        })?;
        FontRecord::new(
            self.name,
            attributes,
            self.embedding,
            self.provenance.unwrap_or(Provenance::Seed),
        )
        .map_err(|e: PredictError| DatasetError::Parse { line, message: e.to_string() })
    }

    pub fn into_embedding_only(self) -> Result<EmbeddingOnlyFont, DatasetError> {
        let embedding = self.embedding.ok_or(DatasetError::Parse {
            line: self.line,
            message: format!("font {:?} has no embedding", self.name),
        })?;
        Ok(EmbeddingOnlyFont { name: self.name, embedding })
    }
}

struct HeaderLayout {
    has_provenance: bool,
    has_attributes: bool,
    has_embedding: bool,
    columns: usize,
}

fn parse_header(header: &str) -> Result<HeaderLayout, DatasetError> {
    let err = |message: String| DatasetError::Parse { line: 1, message };
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"name") {
        return Err(err("header must start with the `name` column".into()));
    }
    let mut i = 1;
    let has_provenance = cols.get(i) == Some(&"provenance");
    if has_provenance {
        i += 1;
    }
    let has_attributes = cols.get(i) == Some(&"attr_0");
    if has_attributes {
        for a in 0..ATTRIBUTE_DIM {
            let expected = format!("attr_{a}");
            if cols.get(i) != Some(&expected.as_str()) {
                return Err(err(format!("expected column `{expected}`, found {:?}", cols.get(i))));
            }
            i += 1;
        }
    }
    let has_embedding = cols.get(i) == Some(&"emb_0");
    if has_embedding {
        for e in 0..EMBEDDING_DIM {
            let expected = format!("emb_{e}");
            if cols.get(i) != Some(&expected.as_str()) {
                return Err(err(format!("expected column `{expected}`, found {:?}", cols.get(i))));
            }
            i += 1;
        }
    }
    if i != cols.len() {
        return Err(err(format!("unexpected trailing column {:?}", cols[i])));
    }
    if !has_attributes && !has_embedding {
        return Err(err("header carries neither attribute nor embedding columns".into()));
    }
    Ok(HeaderLayout { has_provenance, has_attributes, has_embedding, columns: cols.len() })
}

/// Parse a dataset from CSV text.
pub fn parse_dataset(text: &str) -> Result<Vec<ParsedFont>, DatasetError> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or(DatasetError::Parse { line: 1, message: "empty file".into() })?
        .1;
    let layout = parse_header(header)?;

    let mut out = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let cells: Vec<&str> = raw.split(',').collect();
        if cells.len() != layout.columns {
            return Err(DatasetError::Parse {
                line,
                message: format!("{} fields, header declares {}", cells.len(), layout.columns),
            });
        }
        let mut i = 0;
        let name = cells[i].to_owned();
        if name.is_empty() {
            return Err(DatasetError::Parse { line, message: "empty font name".into() });
        }
        i += 1;
        let provenance = if layout.has_provenance {
            let p = match cells[i] {
                "seed" => Provenance::Seed,
                "extended" => Provenance::Extended,
                other => {
                    return Err(DatasetError::Parse {
                        line,
                        message: format!("unknown provenance {other:?}"),
                    })
                }
            };
            i += 1;
            Some(p)
        } else {
            None
        };
        let attributes = if layout.has_attributes {
            let mut attrs = Vec::with_capacity(ATTRIBUTE_DIM);
            for a in 0..ATTRIBUTE_DIM {
                attrs.push(parse_number(cells[i + a], line, &format!("attr_{a}"))?);
            }
            i += ATTRIBUTE_DIM;
            Some(attrs)
        } else {
            None
        };
        let embedding = if layout.has_embedding {
            let block = &cells[i..i + EMBEDDING_DIM];
            if block.iter().all(|c| c.is_empty()) {
                None
            } else {
                let mut emb = Vec::with_capacity(EMBEDDING_DIM);
                for (e, cell) in block.iter().enumerate() {
                    emb.push(parse_number(cell, line, &format!("emb_{e}"))?);
                }
                Some(emb)
            }
        } else {
            None
        };
        out.push(ParsedFont { name, provenance, attributes, embedding, line });
    }
    Ok(out)
}

fn parse_number(cell: &str, line: usize, column: &str) -> Result<f64, DatasetError> {
    let v: f64 = cell.parse().map_err(|_| DatasetError::Parse {
        line,
        message: format!("column {column}: cannot parse {cell:?} as a number"),
    })?;
    if !v.is_finite() {
        return Err(DatasetError::Parse {
            line,
            message: format!("column {column}: non-finite value"),
        });
    }
    Ok(v)
}

pub fn read_dataset<P: AsRef<Path>>(path: P) -> Result<Vec<ParsedFont>, DatasetError> {
    let text = fs::read_to_string(path)?;
    parse_dataset(&text)
}

/// Serialize records to CSV. The provenance column is always written;
/// embedding columns are written when any record has an embedding, with
/// empty cells for records that do not.
pub fn dataset_to_string(records: &[FontRecord]) -> Result<String, DatasetError> {
    let any_embedding = records.iter().any(|r| r.embedding.is_some());
    let mut out = String::from("name,provenance");
    for a in 0..ATTRIBUTE_DIM {
        out.push_str(&format!(",attr_{a}"));
    }
    if any_embedding {
        for e in 0..EMBEDDING_DIM {
            out.push_str(&format!(",emb_{e}"));
        }
    }
    out.push('\n');
    for r in records {
        if r.name.contains(',') || r.name.contains('\n') || r.name.contains('\r') {
            return Err(DatasetError::InvalidRecord(format!(
                "font name {:?} contains a delimiter",
                r.name
            )));
        }
        out.push_str(&r.name);
        out.push(',');
        out.push_str(&r.provenance.to_string());
        for a in &r.attributes {
            out.push_str(&format!(",{a}"));
        }
        if any_embedding {
            match &r.embedding {
                Some(emb) => {
                    for e in emb {
                        out.push_str(&format!(",{e}"));
                    }
                }
                None => out.push_str(&",".repeat(EMBEDDING_DIM)),
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_dataset<P: AsRef<Path>>(path: P, records: &[FontRecord]) -> Result<(), DatasetError> {
    fs::write(path, dataset_to_string(records)?)?;
    Ok(())
}
