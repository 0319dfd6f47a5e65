//! Stopword handling. A standard English list ships with the crate; callers
//! can load their own list or disable filtering with an empty one.

use std::collections::HashSet;
use std::path::Path;

use crate::error::Result;

const BUNDLED_LIST: &str = include_str!("../data/stopwords.txt");

/// A set of words removed during preprocessing. Lookups expect tokens that
/// are already lowercased.
#[derive(Debug, Clone, Default)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    /// The bundled English list.
    pub fn bundled() -> Self {
        Self::from_lines(BUNDLED_LIST)
    }

    /// An empty list; preprocessing then keeps every token.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Parses one word per line. Blank lines and `#` comments are skipped,
    /// entries are lowercased.
    pub fn from_lines(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|line| !line.is_empty() && !line.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        StopwordList { words }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::from_lines(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}
