//! Readers and writers for the on-disk formats: notes as JSONL or CSV, the
//! sparse matrix as a text triple file, and vocabularies as one term per
//! line.
//!
//! Record-level problems surface as [`RawRecord::Malformed`] entries so a
//! single bad row cannot abort ingestion; only unreadable streams fail.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::corpus::{Note, RawRecord};
use crate::error::{Error, Result};
use crate::matrix::{DocTermMatrix, Vocabulary};

#[derive(Debug, Deserialize)]
struct LenientNote {
    note_id: Option<String>,
    #[serde(default)]
    patient_id: String,
    text: Option<String>,
    #[serde(default)]
    note_type: String,
    #[serde(default, alias = "encounter_dept")]
    department: String,
    #[serde(default, alias = "dept_specialty")]
    specialty: String,
    #[serde(default)]
    provider_type: String,
    #[serde(default)]
    icd10_codes: Vec<String>,
}

impl LenientNote {
    fn into_note(self, fallback_id: String) -> std::result::Result<Note, String> {
        let text = self.text.ok_or("missing required field \"text\"")?;
        Ok(Note {
            note_id: self.note_id.unwrap_or(fallback_id),
            patient_id: self.patient_id,
            text,
            note_type: self.note_type,
            department: self.department,
            specialty: self.specialty,
            provider_type: self.provider_type,
            icd10_codes: self.icd10_codes,
        })
    }
}

/// Reads newline-delimited JSON notes. Blank lines are skipped; lines that
/// fail to parse become malformed records.
pub fn read_notes_jsonl(reader: impl Read) -> Result<Vec<RawRecord>> {
    let reader = BufReader::new(reader);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let context = format!("line {}", idx + 1);
        let record = match serde_json::from_str::<LenientNote>(&line) {
            Ok(raw) => match raw.into_note(format!("rec{}", idx + 1)) {
                Ok(note) => RawRecord::Valid(note),
                Err(reason) => RawRecord::Malformed { context, reason },
            },
            Err(e) => RawRecord::Malformed {
                context,
                reason: e.to_string(),
            },
        };
        records.push(record);
    }
    Ok(records)
}

/// Reads notes from CSV with a header row. Recognized columns: `note_id`,
/// `patient_id`, `text`, `note_type`, `department`, `specialty`,
/// `provider_type`, `icd10_codes` (semicolon-separated). A file without a
/// `text` column is unusable and fails outright.
pub fn read_notes_csv(reader: impl Read) -> Result<Vec<RawRecord>> {
    let mut csv_reader = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);

    let text_col = column("text")
        .ok_or_else(|| Error::malformed("csv notes file has no \"text\" column".to_string()))?;
    let id_col = column("note_id");
    let patient_col = column("patient_id");
    let type_col = column("note_type");
    let department_col = column("department").or_else(|| column("encounter_dept"));
    let specialty_col = column("specialty").or_else(|| column("dept_specialty"));
    let provider_col = column("provider_type");
    let codes_col = column("icd10_codes");

    let mut records = Vec::new();
    for (idx, row) in csv_reader.records().enumerate() {
        let context = format!("record {}", idx + 1);
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                records.push(RawRecord::Malformed {
                    context,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let field =
            |col: Option<usize>| col.and_then(|c| row.get(c)).unwrap_or_default().to_string();
        let text = match row.get(text_col) {
            Some(t) => t.to_string(),
            None => {
                records.push(RawRecord::Malformed {
                    context,
                    reason: "row is missing the text field".to_string(),
                });
                continue;
            }
        };
        let codes = field(codes_col);
        let icd10_codes = codes
            .split(';')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::to_string)
            .collect();
        let note_id = match field(id_col) {
            id if id.is_empty() => format!("rec{}", idx + 1),
            id => id,
        };
        records.push(RawRecord::Valid(Note {
            note_id,
            patient_id: field(patient_col),
            text,
            note_type: field(type_col),
            department: field(department_col),
            specialty: field(specialty_col),
            provider_type: field(provider_col),
            icd10_codes,
        }));
    }
    Ok(records)
}

/// Reads notes from a path, picking the format by extension (`.csv` means
/// CSV, anything else JSONL).
pub fn read_notes_path(path: impl AsRef<Path>) -> Result<Vec<RawRecord>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let is_csv = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false);
    if is_csv {
        read_notes_csv(file)
    } else {
        read_notes_jsonl(file)
    }
}

pub fn write_notes_jsonl(writer: impl Write, notes: &[Note]) -> Result<()> {
    let mut writer = BufWriter::new(writer);
    for note in notes {
        serde_json::to_writer(&mut writer, note)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_notes_jsonl_path(path: impl AsRef<Path>, notes: &[Note]) -> Result<()> {
    write_notes_jsonl(File::create(path)?, notes)
}

/// Writes the sparse matrix as text: a `rows cols nnz` header, then one
/// `doc term count` triple per line with zero-based indices.
pub fn write_matrix(writer: impl Write, matrix: &DocTermMatrix) -> Result<()> {
    let mut writer = BufWriter::new(writer);
    writeln!(
        writer,
        "{} {} {}",
        matrix.rows(),
        matrix.cols(),
        matrix.nnz()
    )?;
    for doc in 0..matrix.rows() {
        for &(term, count) in matrix.row(doc) {
            writeln!(writer, "{doc} {term} {count}")?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_matrix_path(path: impl AsRef<Path>, matrix: &DocTermMatrix) -> Result<()> {
    write_matrix(File::create(path)?, matrix)
}

/// Reads a matrix written by [`write_matrix`], attaching the given
/// vocabulary. Document frequencies are recomputed from the entries.
pub fn read_matrix(reader: impl Read, terms: Vec<String>) -> Result<DocTermMatrix> {
    let reader = BufReader::new(reader);
    let mut lines = reader.lines();

    let header = lines
        .next()
        .ok_or_else(|| Error::malformed("matrix file is empty"))??;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|f| f.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::malformed(format!("bad matrix header {header:?}: {e}")))?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(Error::malformed(format!(
            "matrix header must be \"rows cols nnz\", got {header:?}"
        )));
    };
    if cols != terms.len() {
        return Err(Error::malformed(format!(
            "matrix declares {cols} columns but the vocabulary has {} terms",
            terms.len()
        )));
    }

    let mut doc_rows: Vec<Vec<(u32, u32)>> = vec![Vec::new(); rows];
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<u64> = line
            .split_whitespace()
            .map(|f| f.parse::<u64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::malformed(format!("bad matrix entry {line:?}: {e}")))?;
        let [doc, term, count] = fields[..] else {
            return Err(Error::malformed(format!(
                "matrix entries must be \"doc term count\", got {line:?}"
            )));
        };
        if doc as usize >= rows {
            return Err(Error::malformed(format!(
                "matrix entry references document {doc} but the header declares {rows} rows"
            )));
        }
        let count = u32::try_from(count)
            .map_err(|_| Error::malformed(format!("count {count} does not fit in u32")))?;
        doc_rows[doc as usize].push((term as u32, count));
        seen += 1;
    }
    if seen != nnz {
        return Err(Error::malformed(format!(
            "matrix header declares {nnz} entries but the file contains {seen}"
        )));
    }

    let mut document_frequency = vec![0u32; cols];
    for row in &mut doc_rows {
        row.sort_unstable_by_key(|&(term, _)| term);
        for &(term, _) in row.iter() {
            if (term as usize) < cols {
                document_frequency[term as usize] += 1;
            }
        }
    }

    let vocabulary = Vocabulary::new(terms, document_frequency)?;
    DocTermMatrix::from_rows(doc_rows, vocabulary)
}

pub fn read_matrix_paths(
    matrix_path: impl AsRef<Path>,
    vocab_path: impl AsRef<Path>,
) -> Result<DocTermMatrix> {
    let terms = read_vocabulary(File::open(vocab_path)?)?;
    read_matrix(File::open(matrix_path)?, terms)
}

/// Writes one term per line; the line number is the term id.
pub fn write_vocabulary(writer: impl Write, vocabulary: &Vocabulary) -> Result<()> {
    let mut writer = BufWriter::new(writer);
    for term in vocabulary.terms() {
        writeln!(writer, "{term}")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_vocabulary_path(path: impl AsRef<Path>, vocabulary: &Vocabulary) -> Result<()> {
    write_vocabulary(File::create(path)?, vocabulary)
}

pub fn read_vocabulary(reader: impl Read) -> Result<Vec<String>> {
    let reader = BufReader::new(reader);
    let mut terms = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let term = line.trim();
        if !term.is_empty() {
            terms.push(term.to_string());
        }
    }
    Ok(terms)
}

pub fn read_vocabulary_path(path: impl AsRef<Path>) -> Result<Vec<String>> {
    read_vocabulary(File::open(path)?)
}
