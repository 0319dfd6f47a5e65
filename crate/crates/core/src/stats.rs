//! Class-enrichment statistics: per-term chi-squared tests, one-vs-rest
//! top-word ranking, class frequency tables, and the chapter-expansion
//! helper that turns multi-label diagnosis codes into per-class rows.

use std::collections::HashSet;

use ndarray::Array2;

use crate::corpus::Note;
use crate::error::{Error, Result};
use crate::icd10::{self, Chapter};
use crate::math::chi2_sf;
use crate::matrix::DocTermMatrix;

/// A class assignment for every row of a matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassLabeling {
    labels: Vec<u32>,
    class_names: Vec<String>,
}

impl ClassLabeling {
    pub fn new(labels: Vec<u32>, class_names: Vec<String>) -> Result<Self> {
        let num_classes = class_names.len() as u32;
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::precondition(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        let mut unique = HashSet::new();
        if let Some(dup) = class_names.iter().find(|n| !unique.insert(n.as_str())) {
            return Err(Error::precondition(format!("duplicate class name {dup:?}")));
        }
        Ok(ClassLabeling {
            labels,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, doc: usize) -> u32 {
        self.labels[doc]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_name(&self, class: usize) -> &str {
        &self.class_names[class]
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_doc_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes()];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

/// Per-term goodness-of-fit results across classes.
#[derive(Debug, Clone)]
pub struct Chi2Result {
    pub statistic: Vec<f64>,
    pub p_value: Vec<f64>,
    pub degrees_of_freedom: usize,
}

fn validate_labeling(matrix: &DocTermMatrix, labeling: &ClassLabeling) -> Result<()> {
    if labeling.len() != matrix.rows() {
        return Err(Error::precondition(format!(
            "labeling covers {} documents but the matrix has {} rows",
            labeling.len(),
            matrix.rows()
        )));
    }
    if labeling.num_classes() < 2 {
        return Err(Error::precondition(
            "chi-squared enrichment needs at least two classes",
        ));
    }
    if let Some(empty) = labeling
        .class_doc_counts()
        .iter()
        .position(|&count| count == 0)
    {
        return Err(Error::precondition(format!(
            "class {:?} has no documents",
            labeling.class_name(empty)
        )));
    }
    Ok(())
}

/// Observed token counts per class (classes by terms) and per-class totals.
fn observed_counts(matrix: &DocTermMatrix, labeling: &ClassLabeling) -> (Vec<f64>, Vec<f64>) {
    let v = matrix.cols();
    let mut observed = vec![0.0f64; labeling.num_classes() * v];
    let mut class_tokens = vec![0.0f64; labeling.num_classes()];
    for doc in 0..matrix.rows() {
        let class = labeling.label(doc) as usize;
        for &(term, count) in matrix.row(doc) {
            observed[class * v + term as usize] += count as f64;
            class_tokens[class] += count as f64;
        }
    }
    (observed, class_tokens)
}

/// For every term, tests whether its counts are distributed across classes
/// in proportion to class token totals. Expected counts are
/// `E[c] = total(term) * tokens(c) / tokens`, the statistic sums
/// `(O - E)^2 / E` over cells with `E > 0`, and the p-value is the upper
/// tail of chi-squared with `classes - 1` degrees of freedom. Terms absent
/// from every class get statistic zero and p-value one.
pub fn chi2(matrix: &DocTermMatrix, labeling: &ClassLabeling) -> Result<Chi2Result> {
    validate_labeling(matrix, labeling)?;
    let v = matrix.cols();
    let c = labeling.num_classes();
    let df = c - 1;
    let (observed, class_tokens) = observed_counts(matrix, labeling);
    let total: f64 = class_tokens.iter().sum();

    let mut statistic = vec![0.0f64; v];
    let mut p_value = vec![1.0f64; v];
    for term in 0..v {
        let term_total: f64 = (0..c).map(|class| observed[class * v + term]).sum();
        if term_total == 0.0 {
            continue;
        }
        let mut stat = 0.0;
        for class in 0..c {
            let expected = term_total * class_tokens[class] / total;
            if expected > 0.0 {
                let diff = observed[class * v + term] - expected;
                stat += diff * diff / expected;
            }
        }
        statistic[term] = stat;
        p_value[term] = chi2_sf(stat, df)?;
    }

    Ok(Chi2Result {
        statistic,
        p_value,
        degrees_of_freedom: df,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopWord {
    pub term: String,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopWords {
    pub words: Vec<TopWord>,
    /// True when fewer than the requested number of enriched terms existed,
    /// so the list is shorter than asked for.
    pub truncated: bool,
}

/// Ranks terms over-represented in `class_id` against the rest of the
/// corpus: binary chi-squared, keeping only terms whose observed count in
/// the class exceeds its expectation. Ordering is p-value ascending, then
/// statistic descending, then term. `exclusions` are dropped before
/// ranking.
pub fn one_vs_rest_top_words(
    matrix: &DocTermMatrix,
    labeling: &ClassLabeling,
    class_id: usize,
    k: usize,
    exclusions: &HashSet<String>,
) -> Result<TopWords> {
    validate_labeling(matrix, labeling)?;
    if class_id >= labeling.num_classes() {
        return Err(Error::precondition(format!(
            "class id {class_id} out of range for {} classes",
            labeling.num_classes()
        )));
    }
    let binary_labels: Vec<u32> = labeling
        .labels()
        .iter()
        .map(|&l| if l as usize == class_id { 0 } else { 1 })
        .collect();
    if !binary_labels.contains(&1) {
        return Err(Error::precondition(format!(
            "class {:?} covers the whole corpus, nothing to compare against",
            labeling.class_name(class_id)
        )));
    }
    let binary = ClassLabeling::new(binary_labels, vec!["class".into(), "rest".into()])?;

    let v = matrix.cols();
    let (observed, class_tokens) = observed_counts(matrix, &binary);
    let total: f64 = class_tokens.iter().sum();
    let result = chi2(matrix, &binary)?;

    let vocabulary = matrix.vocabulary();
    let mut candidates: Vec<TopWord> = Vec::new();
    for term in 0..v {
        let term_str = vocabulary.term(term);
        if exclusions.contains(term_str) {
            continue;
        }
        let term_total: f64 = observed[term] + observed[v + term];
        if term_total == 0.0 {
            continue;
        }
        let expected_in_class = term_total * class_tokens[0] / total;
        if observed[term] > expected_in_class {
            candidates.push(TopWord {
                term: term_str.to_string(),
                statistic: result.statistic[term],
                p_value: result.p_value[term],
            });
        }
    }

    candidates.sort_by(|a, b| {
        a.p_value
            .total_cmp(&b.p_value)
            .then(b.statistic.total_cmp(&a.statistic))
            .then(a.term.cmp(&b.term))
    });

    let truncated = candidates.len() < k;
    if truncated {
        log::warn!(
            "class {:?} has only {} enriched terms, {k} requested",
            labeling.class_name(class_id),
            candidates.len()
        );
    }
    candidates.truncate(k);
    Ok(TopWords {
        words: candidates,
        truncated,
    })
}

/// Proportion of each class's tokens falling on each listed word
/// (classes by words). Words must exist in the vocabulary. A class with no
/// tokens yields a zero row and a warning.
pub fn word_frequency_table(
    matrix: &DocTermMatrix,
    labeling: &ClassLabeling,
    words: &[String],
) -> Result<Array2<f64>> {
    validate_labeling(matrix, labeling)?;
    let vocabulary = matrix.vocabulary();
    let ids: Vec<u32> = words
        .iter()
        .map(|w| {
            vocabulary
                .id(w)
                .ok_or_else(|| Error::precondition(format!("word {w:?} is not in the vocabulary")))
        })
        .collect::<Result<_>>()?;

    let v = matrix.cols();
    let c = labeling.num_classes();
    let (observed, class_tokens) = observed_counts(matrix, labeling);

    let mut table = Array2::zeros((c, words.len()));
    for class in 0..c {
        if class_tokens[class] == 0.0 {
            log::warn!(
                "class {:?} has no tokens; frequency row is all zeros",
                labeling.class_name(class)
            );
            continue;
        }
        for (j, &term) in ids.iter().enumerate() {
            table[(class, j)] = observed[class * v + term as usize] / class_tokens[class];
        }
    }
    Ok(table)
}

/// Terms present in more than `fraction` of documents, computed from the
/// matrix itself. Used to keep ubiquitous words out of enrichment lists.
pub fn frequent_terms(matrix: &DocTermMatrix, fraction: f64) -> HashSet<String> {
    let rows = matrix.rows();
    let mut df = vec![0usize; matrix.cols()];
    for doc in 0..rows {
        for &(term, _) in matrix.row(doc) {
            df[term as usize] += 1;
        }
    }
    let threshold = fraction * rows as f64;
    df.iter()
        .enumerate()
        .filter(|&(_, &count)| count as f64 > threshold)
        .map(|(term, _)| matrix.vocabulary().term(term).to_string())
        .collect()
}

/// Expands a corpus into one row per (document, chapter) pair: a document
/// whose codes map to several of the given chapters appears once per
/// chapter. Chapters that end up with no documents are dropped with a
/// warning. Class names are chapter labels, in the order given.
pub fn expand_by_chapter(
    matrix: &DocTermMatrix,
    notes: &[Note],
    chapters: &[&'static Chapter],
) -> Result<(DocTermMatrix, ClassLabeling)> {
    if notes.len() != matrix.rows() {
        return Err(Error::precondition(format!(
            "{} notes but {} matrix rows",
            notes.len(),
            matrix.rows()
        )));
    }
    if chapters.is_empty() {
        return Err(Error::precondition("no chapters requested"));
    }

    let mut rows_per_chapter: Vec<Vec<usize>> = vec![Vec::new(); chapters.len()];
    for (doc, note) in notes.iter().enumerate() {
        let mut hit = vec![false; chapters.len()];
        for code in &note.icd10_codes {
            if let Some(chapter) = icd10::chapter_of(code) {
                if let Some(pos) = chapters.iter().position(|c| *c == chapter) {
                    hit[pos] = true;
                }
            }
        }
        for (pos, &h) in hit.iter().enumerate() {
            if h {
                rows_per_chapter[pos].push(doc);
            }
        }
    }

    let mut docs = Vec::new();
    let mut labels = Vec::new();
    let mut class_names = Vec::new();
    for (pos, chapter_rows) in rows_per_chapter.iter().enumerate() {
        if chapter_rows.is_empty() {
            log::warn!(
                "chapter {:?} has no documents, dropping it",
                chapters[pos].label()
            );
            continue;
        }
        let class = class_names.len() as u32;
        class_names.push(chapters[pos].label());
        for &doc in chapter_rows {
            docs.push(doc);
            labels.push(class);
        }
    }

    let expanded = matrix.select_rows(&docs)?;
    let labeling = ClassLabeling::new(labels, class_names)?;
    Ok((expanded, labeling))
}
