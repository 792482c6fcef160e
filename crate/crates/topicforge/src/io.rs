//! Corpus file formats.
//!
//! The canonical format is newline-delimited JSON, one record per line:
//! `{"id": str, "topic": str, "text": str, "label": 0|1}`. Delimited text
//! (comma or tab separated, with a header row) is read through a column
//! mapping.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use topicforge_core::{Claim, Corpus, CorpusError, Label, NormalizationConfig};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Read(#[from] io::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
}

impl IoError {
    pub fn file(path: &Path, source: io::Error) -> Self {
        IoError::File {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Ndjson,
    Csv,
    Tsv,
}

impl CorpusFormat {
    /// `.csv` and `.tsv` by extension, NDJSON otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            Some(e) if e.eq_ignore_ascii_case("tsv") => CorpusFormat::Tsv,
            _ => CorpusFormat::Ndjson,
        }
    }
}

/// Header names of the four fields in a delimited file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub id: String,
    pub topic: String,
    pub text: String,
    pub label: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            id: "id".into(),
            topic: "topic".into(),
            text: "text".into(),
            label: "label".into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Record<'a> {
    id: std::borrow::Cow<'a, str>,
    topic: std::borrow::Cow<'a, str>,
    text: std::borrow::Cow<'a, str>,
    label: Label,
}

fn malformed(line: usize, reason: impl ToString) -> CorpusError {
    CorpusError::MalformedRecord {
        line,
        reason: reason.to_string(),
    }
}

/// Reads NDJSON records. Blank lines are skipped; line numbers in errors are 1-based.
pub fn read_ndjson<R: BufRead>(
    reader: R,
    norm: &NormalizationConfig,
) -> Result<Vec<Claim>, IoError> {
    let mut claims = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| malformed(i + 1, e))?;
        claims.push(Claim::new(rec.id, rec.topic, rec.text, rec.label, norm));
    }
    Ok(claims)
}

/// Writes claims as NDJSON using their raw text.
pub fn write_ndjson<W: Write>(mut writer: W, claims: &[Claim]) -> io::Result<()> {
    for c in claims {
        let rec = Record {
            id: c.id.as_str().into(),
            topic: c.topic_id.as_str().into(),
            text: c.raw_text.as_str().into(),
            label: c.label,
        };
        serde_json::to_writer(&mut writer, &rec)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Reads a delimited file with a header row. Line numbers in errors count the header as line 1.
pub fn read_delimited<R: Read>(
    reader: R,
    delimiter: u8,
    columns: &ColumnMap,
    norm: &NormalizationConfig,
) -> Result<Vec<Claim>, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| malformed(1, e))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IoError::MissingColumn(name.into()))
    };
    let (id, topic, text, label) = (
        find(&columns.id)?,
        find(&columns.topic)?,
        find(&columns.text)?,
        find(&columns.label)?,
    );
    let mut claims = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| malformed(line, e))?;
        let field = |k: usize| row.get(k).ok_or_else(|| malformed(line, "missing field"));
        let label = Label::parse(field(label)?)?;
        claims.push(Claim::new(
            field(id)?,
            field(topic)?,
            field(text)?,
            label,
            norm,
        ));
    }
    Ok(claims)
}

/// Loads and validates a corpus file. `format` defaults to the one implied by the extension.
pub fn load_corpus(
    path: &Path,
    format: Option<CorpusFormat>,
    columns: &ColumnMap,
    norm: &NormalizationConfig,
) -> Result<Corpus, IoError> {
    let file = File::open(path).map_err(|e| IoError::file(path, e))?;
    let claims = match format.unwrap_or_else(|| CorpusFormat::from_path(path)) {
        CorpusFormat::Ndjson => read_ndjson(BufReader::new(file), norm)?,
        CorpusFormat::Csv => read_delimited(file, b',', columns, norm)?,
        CorpusFormat::Tsv => read_delimited(file, b'\t', columns, norm)?,
    };
    Ok(Corpus::from_claims(claims)?)
}
