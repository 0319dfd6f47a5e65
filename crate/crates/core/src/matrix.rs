//! Vocabulary and sparse document-term matrix construction.

use std::collections::{BTreeMap, HashMap};

use sha2::{Digest, Sha256};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::stopwords::StopwordList;

/// An ordered term list with document frequencies. Term ids are positions
/// in the list; [`build_matrix_from_tokens`] orders terms lexicographically
/// so ids are reproducible regardless of input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
    document_frequency: Vec<u32>,
}

impl Vocabulary {
    pub fn new(terms: Vec<String>, document_frequency: Vec<u32>) -> Result<Self> {
        if terms.len() != document_frequency.len() {
            return Err(Error::precondition(format!(
                "vocabulary has {} terms but {} document frequencies",
                terms.len(),
                document_frequency.len()
            )));
        }
        let mut index = HashMap::with_capacity(terms.len());
        for (id, term) in terms.iter().enumerate() {
            if term.is_empty() {
                return Err(Error::malformed("vocabulary contains an empty term"));
            }
            if index.insert(term.clone(), id as u32).is_some() {
                return Err(Error::malformed(format!(
                    "vocabulary contains duplicate term {term:?}"
                )));
            }
        }
        Ok(Vocabulary {
            terms,
            index,
            document_frequency,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, id: usize) -> &str {
        &self.terms[id]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    /// Number of documents the term appeared in when the vocabulary was
    /// built.
    pub fn document_frequency(&self, id: usize) -> u32 {
        self.document_frequency[id]
    }

    /// Hash of the newline-joined term list; persisted models use it to
    /// detect vocabulary mismatches at load time.
    pub fn sha256_hex(&self) -> String {
        let mut hasher = Sha256::new();
        for term in &self.terms {
            hasher.update(term.as_bytes());
            hasher.update(b"\n");
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Sparse document-term count matrix. Each row holds `(term_id, count)`
/// pairs sorted by term id with counts at least one.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    doc_rows: Vec<Vec<(u32, u32)>>,
    vocabulary: Vocabulary,
}

impl DocTermMatrix {
    /// Validates row invariants: ids in range, counts positive, entries
    /// strictly sorted by term id.
    pub fn from_rows(doc_rows: Vec<Vec<(u32, u32)>>, vocabulary: Vocabulary) -> Result<Self> {
        let cols = vocabulary.len() as u32;
        for (d, row) in doc_rows.iter().enumerate() {
            let mut prev: Option<u32> = None;
            for &(term, count) in row {
                if term >= cols {
                    return Err(Error::malformed(format!(
                        "document {d} references term id {term} but the vocabulary has {cols} terms"
                    )));
                }
                if count == 0 {
                    return Err(Error::malformed(format!(
                        "document {d} stores an explicit zero count for term {term}"
                    )));
                }
                if let Some(p) = prev {
                    if term <= p {
                        return Err(Error::malformed(format!(
                            "document {d} rows must be strictly sorted by term id"
                        )));
                    }
                }
                prev = Some(term);
            }
        }
        Ok(DocTermMatrix {
            doc_rows,
            vocabulary,
        })
    }

    pub fn rows(&self) -> usize {
        self.doc_rows.len()
    }

    pub fn cols(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn nnz(&self) -> usize {
        self.doc_rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, doc: usize) -> &[(u32, u32)] {
        &self.doc_rows[doc]
    }

    pub fn row_sum(&self, doc: usize) -> u64 {
        self.doc_rows[doc]
            .iter()
            .map(|&(_, count)| count as u64)
            .sum()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    /// Total count of each term across all documents.
    pub fn term_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.cols()];
        for row in &self.doc_rows {
            for &(term, count) in row {
                totals[term as usize] += count as u64;
            }
        }
        totals
    }

    /// New matrix containing the given rows (duplicates allowed), sharing
    /// the vocabulary.
    pub fn select_rows(&self, docs: &[usize]) -> Result<DocTermMatrix> {
        let mut rows = Vec::with_capacity(docs.len());
        for &d in docs {
            if d >= self.rows() {
                return Err(Error::precondition(format!(
                    "row {d} out of range for a matrix with {} rows",
                    self.rows()
                )));
            }
            rows.push(self.doc_rows[d].clone());
        }
        Ok(DocTermMatrix {
            doc_rows: rows,
            vocabulary: self.vocabulary.clone(),
        })
    }
}

/// Builds the matrix from already-tokenized documents. Terms appearing in
/// fewer than `min_df` documents are dropped; surviving terms are ordered
/// lexicographically. Documents left without any in-vocabulary token keep
/// an empty row so alignment with the corpus holds.
pub fn build_matrix_from_tokens(tokens: &[Vec<String>], min_df: usize) -> Result<DocTermMatrix> {
    if tokens.is_empty() {
        return Err(Error::precondition(
            "cannot build a document-term matrix from an empty corpus",
        ));
    }

    let mut df: BTreeMap<&str, u32> = BTreeMap::new();
    for doc in tokens {
        let mut seen: Vec<&str> = doc.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for term in seen {
            *df.entry(term).or_insert(0) += 1;
        }
    }

    let distinct = df.len();
    let min_df = min_df.max(1) as u32;
    let kept: Vec<(&str, u32)> = df
        .into_iter()
        .filter(|&(_, count)| count >= min_df)
        .collect();

    if kept.is_empty() {
        return Err(Error::config(format!(
            "empty vocabulary: none of the {distinct} distinct terms across {} documents \
             reaches min_df = {min_df}",
            tokens.len()
        )));
    }

    let terms: Vec<String> = kept.iter().map(|&(t, _)| t.to_string()).collect();
    let freqs: Vec<u32> = kept.iter().map(|&(_, f)| f).collect();
    let vocabulary = Vocabulary::new(terms, freqs)?;

    Ok(vectorize_with_vocabulary(tokens, &vocabulary))
}

/// Counts tokens against a fixed vocabulary; out-of-vocabulary tokens are
/// ignored. Used when applying a persisted model to new text.
pub fn vectorize_with_vocabulary(tokens: &[Vec<String>], vocabulary: &Vocabulary) -> DocTermMatrix {
    let doc_rows = tokens
        .iter()
        .map(|doc| {
            let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
            for token in doc {
                if let Some(id) = vocabulary.id(token) {
                    *counts.entry(id).or_insert(0) += 1;
                }
            }
            counts.into_iter().collect::<Vec<_>>()
        })
        .collect();
    DocTermMatrix {
        doc_rows,
        vocabulary: vocabulary.clone(),
    }
}

/// Tokenizes a corpus and builds its matrix in one step.
pub fn build_matrix(
    corpus: &Corpus,
    stopwords: &StopwordList,
    min_df: usize,
) -> Result<DocTermMatrix> {
    let tokens = crate::corpus::tokenize_corpus(corpus, stopwords);
    build_matrix_from_tokens(&tokens, min_df)
}
