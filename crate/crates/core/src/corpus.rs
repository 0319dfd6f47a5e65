//! Note corpus types, ingestion filters, and text preprocessing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stopwords::StopwordList;

/// A single note with the routing metadata used for filtering and subset
/// reporting. Unknown metadata stays as empty strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Note {
    pub note_id: String,
    #[serde(default)]
    pub patient_id: String,
    pub text: String,
    /// Encounter type, e.g. an office visit or a telephone encounter.
    #[serde(default)]
    pub note_type: String,
    /// Encounter department name.
    #[serde(default)]
    pub department: String,
    /// Encounter department specialty.
    #[serde(default)]
    pub specialty: String,
    /// Authentication provider type.
    #[serde(default)]
    pub provider_type: String,
    /// Billing diagnosis codes attached to the encounter.
    #[serde(default)]
    pub icd10_codes: Vec<String>,
}

/// Outcome of parsing one input record. Readers yield `Malformed` instead
/// of failing so that one bad row does not abort ingestion.
#[derive(Debug, Clone)]
pub enum RawRecord {
    Valid(Note),
    Malformed { context: String, reason: String },
}

/// Case-insensitive keyword match over the four routing metadata fields.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetadataFilter {
    keyword: Option<String>,
}

impl MetadataFilter {
    /// Keeps only notes whose metadata mentions `word` (substring match,
    /// case-insensitive).
    pub fn keyword(word: &str) -> Result<Self> {
        let word = word.trim().to_lowercase();
        if word.is_empty() {
            return Err(Error::config("metadata filter keyword must be non-empty"));
        }
        Ok(MetadataFilter {
            keyword: Some(word),
        })
    }

    /// Keeps every note.
    pub fn none() -> Self {
        MetadataFilter::default()
    }

    pub fn keyword_str(&self) -> Option<&str> {
        self.keyword.as_deref()
    }

    pub fn matches(&self, note: &Note) -> bool {
        match &self.keyword {
            None => true,
            Some(word) => [
                &note.note_type,
                &note.department,
                &note.specialty,
                &note.provider_type,
            ]
            .iter()
            .any(|field| field.to_lowercase().contains(word)),
        }
    }
}

/// Counts recorded while building a corpus, kept for reporting.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub input_records: usize,
    pub rejected_records: usize,
    pub keyword: Option<String>,
    pub after_keyword_filter: usize,
    pub min_len: Option<usize>,
    pub removed_short: usize,
    pub removed_duplicates: usize,
    pub retained: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub notes: Vec<Note>,
    pub provenance: Provenance,
}

impl Corpus {
    pub fn from_notes(notes: Vec<Note>) -> Self {
        let retained = notes.len();
        Corpus {
            notes,
            provenance: Provenance {
                input_records: retained,
                after_keyword_filter: retained,
                retained,
                ..Provenance::default()
            },
        }
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }
}

/// Builds a corpus from parsed records: malformed records and duplicate
/// note ids are rejected with a warning, then the metadata filter runs.
/// An input yielding zero notes is allowed and produces an empty corpus.
pub fn ingest<I>(records: I, filter: &MetadataFilter) -> Corpus
where
    I: IntoIterator<Item = RawRecord>,
{
    let mut notes: Vec<Note> = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();
    let mut input_records = 0usize;
    let mut rejected = 0usize;

    for record in records {
        input_records += 1;
        match record {
            RawRecord::Malformed { context, reason } => {
                log::warn!("rejecting malformed record ({context}): {reason}");
                rejected += 1;
            }
            RawRecord::Valid(note) => {
                if !seen_ids.insert(note.note_id.clone()) {
                    log::warn!("rejecting duplicate note_id {:?}", note.note_id);
                    rejected += 1;
                } else {
                    notes.push(note);
                }
            }
        }
    }

    let keyword = filter.keyword_str().map(str::to_owned);
    notes.retain(|note| filter.matches(note));
    let after_keyword_filter = notes.len();

    Corpus {
        notes,
        provenance: Provenance {
            input_records,
            rejected_records: rejected,
            keyword,
            after_keyword_filter,
            retained: after_keyword_filter,
            ..Provenance::default()
        },
    }
}

/// Drops notes shorter than `min_len` characters, then removes exact
/// duplicate texts (whitespace runs collapsed for comparison), keeping the
/// first occurrence. Applying the filter twice changes nothing.
pub fn filter_short_and_dedup(corpus: Corpus, min_len: usize) -> Corpus {
    let Corpus {
        notes,
        mut provenance,
    } = corpus;

    let before = notes.len();
    let mut kept: Vec<Note> = Vec::with_capacity(before);
    let mut seen_texts = std::collections::HashSet::new();
    let mut removed_short = 0usize;

    for note in notes {
        if note.text.chars().count() < min_len {
            removed_short += 1;
            continue;
        }
        let normalized = note.text.split_whitespace().collect::<Vec<_>>().join(" ");
        if seen_texts.insert(normalized) {
            kept.push(note);
        }
    }

    let removed_duplicates = before - removed_short - kept.len();
    provenance.min_len = Some(min_len);
    provenance.removed_short += removed_short;
    provenance.removed_duplicates += removed_duplicates;
    provenance.retained = kept.len();

    Corpus {
        notes: kept,
        provenance,
    }
}

/// Tokenizes one text: lowercase, split into alphabetic runs (digits,
/// punctuation, and whitespace all separate tokens), drop single-character
/// tokens and stopwords.
pub fn preprocess(text: &str, stopwords: &StopwordList) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut current_chars = 0usize;

    let flush = |current: &mut String, current_chars: &mut usize, tokens: &mut Vec<String>| {
        if *current_chars >= 2 && !stopwords.contains(current) {
            tokens.push(std::mem::take(current));
        } else {
            current.clear();
        }
        *current_chars = 0;
    };

    for ch in text.chars() {
        if ch.is_alphabetic() {
            for lower in ch.to_lowercase() {
                current.push(lower);
            }
            current_chars += 1;
        } else if current_chars > 0 {
            flush(&mut current, &mut current_chars, &mut tokens);
        }
    }
    if current_chars > 0 {
        flush(&mut current, &mut current_chars, &mut tokens);
    }
    tokens
}

/// Preprocesses every note, preserving corpus order. Notes that tokenize to
/// nothing yield empty vectors so the alignment with the corpus holds.
pub fn tokenize_corpus(corpus: &Corpus, stopwords: &StopwordList) -> Vec<Vec<String>> {
    corpus
        .notes
        .iter()
        .map(|note| preprocess(&note.text, stopwords))
        .collect()
}
