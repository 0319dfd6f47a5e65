//! Topic discovery toolkit for note corpora.
//!
//! The pipeline covers: ingesting and filtering raw notes, building sparse
//! document-term matrices, surfacing class-enriched words with chi-squared
//! tests, fitting online variational-Bayes LDA models, picking the number of
//! topics by coherence and overlap ranking, and naming the resulting topics
//! against a seed dictionary. A synthetic-corpus generator with known ground
//! truth supports end-to-end verification.

pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod icd10;
pub mod io;
pub mod label;
pub mod lda;
pub mod math;
pub mod matrix;
pub mod report;
pub mod seeds;
pub mod stats;
pub mod stopwords;
pub mod synth;

pub use error::{Error, Result};

/// Execution mode for the parallelizable stages.
///
/// `Sequential` guarantees bit-identical output across runs. `Rayon` may
/// reorder floating-point reductions inside a mini-batch, so results can
/// drift in the last bits; stages whose parallel units are fully independent
/// (per-candidate fits, per-document inference) stay exact in both modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Sequential,
    Rayon,
}

/// Default settings shared by the library and the CLI.
pub mod defaults {
    /// Minimum note length in characters; shorter notes are dropped.
    pub const MIN_NOTE_LEN: usize = 30;
    /// Minimum number of documents a term must appear in to enter the vocabulary.
    pub const MIN_DF: usize = 2;
    /// Candidate range for the number-of-topics sweep, inclusive.
    pub const K_RANGE: (usize, usize) = (10, 50);
    /// Words shown per topic and used by coherence/overlap scoring.
    pub const TOP_WORDS: usize = 10;
    /// Independent fit repetitions per subset in a labeling study.
    pub const LABEL_REPEATS: usize = 5;
    /// Nearest neighbors pulled in per seed word when expanding a dictionary.
    pub const EXPANSION_NEIGHBORS: usize = 20;
    /// Sliding-window width for coherence estimation.
    pub const COHERENCE_WINDOW: usize = 110;
    /// Smoothing constant inside the NPMI logarithms.
    pub const NPMI_EPSILON: f64 = 1e-12;
    /// Enriched words reported per class in the frequency analysis.
    pub const FREQ_TOP_K: usize = 5;
    /// Document-frequency fraction above which a term counts as "frequent"
    /// and is excluded from enrichment ranking.
    pub const FREQUENT_TERM_FRACTION: f64 = 0.5;
    /// Base seed when the caller does not supply one.
    pub const SEED: u64 = 42;
}
