//! Synthetic corpus generation with known topic structure, plus the
//! greedy matching used to compare recovered topics against the truth.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DocTermMatrix, Vocabulary};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokensPerDoc {
    Fixed(usize),
    /// Inclusive bounds.
    Range {
        min: usize,
        max: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicStructure {
    /// Topic-word rows drawn from a symmetric Dirichlet(eta_true).
    Dirichlet,
    /// Each topic owns a contiguous vocabulary block holding mass
    /// `1 - p_leak`, with `p_leak` spread uniformly over the rest.
    Block { p_leak: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub k_true: usize,
    pub vocab_size: usize,
    pub docs: usize,
    pub tokens_per_doc: TokensPerDoc,
    /// Symmetric document-topic concentration.
    pub alpha_true: f64,
    /// Symmetric topic-word concentration (Dirichlet structure only).
    pub eta_true: f64,
    pub structure: TopicStructure,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            k_true: 10,
            vocab_size: 500,
            docs: 2000,
            tokens_per_doc: TokensPerDoc::Fixed(100),
            alpha_true: 0.1,
            eta_true: 0.1,
            structure: TopicStructure::Block { p_leak: 0.05 },
            seed: crate::defaults::SEED,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_true < 2 {
            return Err(Error::config("k_true must be at least 2"));
        }
        if self.vocab_size == 0 {
            return Err(Error::config("vocab_size must be positive"));
        }
        if self.docs == 0 {
            return Err(Error::config("docs must be positive"));
        }
        match self.tokens_per_doc {
            TokensPerDoc::Fixed(0) => {
                return Err(Error::config("tokens_per_doc must be positive"));
            }
            TokensPerDoc::Range { min, max } if min == 0 || min > max => {
                return Err(Error::config("tokens_per_doc range needs 1 <= min <= max"));
            }
            _ => {}
        }
        if !(self.alpha_true > 0.0 && self.alpha_true.is_finite()) {
            return Err(Error::config("alpha_true must be positive and finite"));
        }
        if !(self.eta_true > 0.0 && self.eta_true.is_finite()) {
            return Err(Error::config("eta_true must be positive and finite"));
        }
        if let TopicStructure::Block { p_leak } = self.structure {
            if !(0.0..1.0).contains(&p_leak) {
                return Err(Error::config("p_leak must lie in [0, 1)"));
            }
            if self.vocab_size < self.k_true {
                return Err(Error::config("block structure needs vocab_size >= k_true"));
            }
        }
        Ok(())
    }
}

/// A generated corpus together with the parameters that produced it.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub matrix: DocTermMatrix,
    /// K_true x V topic-word distribution, rows summing to one.
    pub true_beta: Array2<f64>,
    /// docs x K_true document-topic distribution, rows summing to one.
    pub true_theta: Array2<f64>,
    /// Term ids per document in generation order.
    pub token_streams: Vec<Vec<u32>>,
}

impl SynthCorpus {
    /// Token streams rendered as strings for window-based scoring.
    pub fn texts(&self) -> Vec<Vec<String>> {
        let terms = self.matrix.vocabulary().terms();
        self.token_streams
            .iter()
            .map(|stream| {
                stream
                    .iter()
                    .map(|&id| terms[id as usize].clone())
                    .collect()
            })
            .collect()
    }
}

/// Synthetic term names: "t" plus a fixed-width base-26 index, so
/// lexicographic order equals index order.
pub fn synthetic_terms(vocab_size: usize) -> Vec<String> {
    let mut width = 1usize;
    let mut capacity = 26usize;
    while capacity < vocab_size {
        width += 1;
        capacity = capacity.saturating_mul(26);
    }
    (0..vocab_size)
        .map(|i| {
            let mut suffix = vec![b'a'; width];
            let mut rest = i;
            for slot in suffix.iter_mut().rev() {
                *slot = b'a' + (rest % 26) as u8;
                rest /= 26;
            }
            format!("t{}", String::from_utf8(suffix).expect("ascii"))
        })
        .collect()
}

fn dirichlet_sample<R: Rng>(rng: &mut R, concentration: f64, dim: usize) -> Result<Vec<f64>> {
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::numeric(format!("invalid Dirichlet concentration: {e}")))?;
    for _ in 0..16 {
        let mut draw: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = draw.iter().sum();
        if sum.is_finite() && sum > 0.0 {
            draw.iter_mut().for_each(|x| *x /= sum);
            return Ok(draw);
        }
    }
    Err(Error::numeric(
        "Dirichlet sampling kept producing a zero vector",
    ))
}

/// Inclusive-prefix cumulative sums for categorical sampling.
fn cumulative(probabilities: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probabilities
        .iter()
        .map(|&p| {
            acc += p;
            acc
        })
        .collect()
}

fn sample_categorical<R: Rng>(rng: &mut R, cumulative: &[f64]) -> usize {
    let total = *cumulative.last().expect("nonempty distribution");
    let u = rng.random::<f64>() * total;
    cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1)
}

fn block_beta(k_true: usize, vocab_size: usize, p_leak: f64) -> Array2<f64> {
    let mut beta = Array2::zeros((k_true, vocab_size));
    for k in 0..k_true {
        let start = k * vocab_size / k_true;
        let end = (k + 1) * vocab_size / k_true;
        let inside = (1.0 - p_leak) / (end - start) as f64;
        let outside = if vocab_size > end - start {
            p_leak / (vocab_size - (end - start)) as f64
        } else {
            0.0
        };
        for v in 0..vocab_size {
            beta[[k, v]] = if (start..end).contains(&v) {
                inside
            } else {
                outside
            };
        }
    }
    beta
}

/// Samples a corpus: topic-word rows from the configured structure,
/// per-document topic mixtures from Dirichlet(alpha_true), then tokens by
/// ancestral sampling. Every document gets its own derived RNG, so the
/// output is a pure function of the spec.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let k = spec.k_true;
    let v = spec.vocab_size;

    let true_beta = match spec.structure {
        TopicStructure::Block { p_leak } => block_beta(k, v, p_leak),
        TopicStructure::Dirichlet => {
            let mut beta = Array2::zeros((k, v));
            for topic in 0..k {
                let mut rng = seeds::rng(spec.seed, &[seeds::TAG_SYNTH_BETA, topic as u64]);
                let row = dirichlet_sample(&mut rng, spec.eta_true, v)?;
                for (slot, value) in beta.row_mut(topic).iter_mut().zip(row) {
                    *slot = value;
                }
            }
            beta
        }
    };
    let beta_cumulative: Vec<Vec<f64>> = (0..k)
        .map(|topic| cumulative(true_beta.row(topic).as_slice().expect("contiguous")))
        .collect();

    let mut true_theta = Array2::zeros((spec.docs, k));
    let mut token_streams = Vec::with_capacity(spec.docs);
    let mut doc_rows = Vec::with_capacity(spec.docs);
    let mut document_frequency = vec![0u32; v];

    for d in 0..spec.docs {
        let mut rng = seeds::rng(spec.seed, &[seeds::TAG_SYNTH_DOC, d as u64]);
        let theta = dirichlet_sample(&mut rng, spec.alpha_true, k)?;
        for (slot, &value) in true_theta.row_mut(d).iter_mut().zip(&theta) {
            *slot = value;
        }
        let theta_cumulative = cumulative(&theta);

        let length = match spec.tokens_per_doc {
            TokensPerDoc::Fixed(n) => n,
            TokensPerDoc::Range { min, max } => rng.random_range(min..=max),
        };

        let mut stream = Vec::with_capacity(length);
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for _ in 0..length {
            let topic = sample_categorical(&mut rng, &theta_cumulative);
            let term = sample_categorical(&mut rng, &beta_cumulative[topic]) as u32;
            stream.push(term);
            *counts.entry(term).or_insert(0) += 1;
        }
        for &term in counts.keys() {
            document_frequency[term as usize] += 1;
        }
        token_streams.push(stream);
        doc_rows.push(counts.into_iter().collect());
    }

    let vocabulary = Vocabulary::new(synthetic_terms(v), document_frequency)?;
    let matrix = DocTermMatrix::from_rows(doc_rows, vocabulary)?;

    Ok(SynthCorpus {
        matrix,
        true_beta,
        true_theta,
        token_streams,
    })
}

/// Result of greedily pairing learned topics with reference topics.
#[derive(Debug, Clone)]
pub struct TopicMatch {
    /// `(learned, reference, cosine)` triples in match order.
    pub pairs: Vec<(usize, usize, f64)>,
    pub mean_cosine: f64,
    /// Topics on the larger side left without a partner.
    pub unmatched: usize,
}

fn row_cosine(a: &Array2<f64>, i: usize, b: &Array2<f64>, j: usize) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.row(i).iter().zip(b.row(j)) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Greedy one-to-one matching by descending cosine similarity between
/// topic-word rows. Produces `min(K_learned, K_reference)` pairs; the
/// surplus on the larger side is reported as unmatched.
pub fn match_topics(learned: &Array2<f64>, reference: &Array2<f64>) -> Result<TopicMatch> {
    if learned.ncols() != reference.ncols() {
        return Err(Error::precondition(format!(
            "vocabulary sizes differ: {} vs {}",
            learned.ncols(),
            reference.ncols()
        )));
    }
    if learned.nrows() == 0 || reference.nrows() == 0 {
        return Err(Error::precondition(
            "matching needs at least one topic per side",
        ));
    }

    let mut cosines = Array2::zeros((learned.nrows(), reference.nrows()));
    for i in 0..learned.nrows() {
        for j in 0..reference.nrows() {
            cosines[[i, j]] = row_cosine(learned, i, reference, j);
        }
    }

    let rounds = learned.nrows().min(reference.nrows());
    let mut learned_used = vec![false; learned.nrows()];
    let mut reference_used = vec![false; reference.nrows()];
    let mut pairs = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..learned.nrows() {
            if learned_used[i] {
                continue;
            }
            for j in 0..reference.nrows() {
                if reference_used[j] {
                    continue;
                }
                let value = cosines[[i, j]];
                // Strict comparison keeps the smallest (i, j) on ties.
                if best.is_none_or(|(_, _, b)| value.total_cmp(&b).is_gt()) {
                    best = Some((i, j, value));
                }
            }
        }
        let (i, j, value) = best.expect("unused topics remain");
        learned_used[i] = true;
        reference_used[j] = true;
        pairs.push((i, j, value));
    }

    let mean_cosine = pairs.iter().map(|&(_, _, c)| c).sum::<f64>() / pairs.len() as f64;
    let unmatched = learned.nrows().max(reference.nrows()) - rounds;
    Ok(TopicMatch {
        pairs,
        mean_cosine,
        unmatched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_spec() -> SynthSpec {
        SynthSpec {
            k_true: 3,
            vocab_size: 30,
            docs: 25,
            tokens_per_doc: TokensPerDoc::Fixed(40),
            structure: TopicStructure::Block { p_leak: 0.1 },
            seed: 7,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn spec_validation_catches_bad_inputs() {
        let ok = small_spec();
        assert!(ok.validate().is_ok());
        assert!(SynthSpec {
            k_true: 1,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SynthSpec {
            vocab_size: 0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SynthSpec {
            docs: 0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SynthSpec {
            tokens_per_doc: TokensPerDoc::Fixed(0),
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SynthSpec {
            tokens_per_doc: TokensPerDoc::Range { min: 9, max: 3 },
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SynthSpec {
            structure: TopicStructure::Block { p_leak: 1.0 },
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SynthSpec {
            structure: TopicStructure::Block { p_leak: -0.1 },
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SynthSpec {
            k_true: 40,
            vocab_size: 30,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SynthSpec {
            alpha_true: 0.0,
            ..ok
        }
        .validate()
        .is_err());
    }

    #[test]
    fn terms_are_fixed_width_and_sorted() {
        let terms = synthetic_terms(30);
        assert_eq!(terms[0], "taa");
        assert_eq!(terms[25], "taz");
        assert_eq!(terms[26], "tba");
        let mut sorted = terms.clone();
        sorted.sort();
        assert_eq!(terms, sorted);
        assert_eq!(synthetic_terms(5), vec!["ta", "tb", "tc", "td", "te"]);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&small_spec()).unwrap();
        let b = generate(&small_spec()).unwrap();
        assert_eq!(a.token_streams, b.token_streams);
        assert_eq!(a.true_beta, b.true_beta);
        assert_eq!(a.true_theta, b.true_theta);
        assert_eq!(a.matrix, b.matrix);

        let other = generate(&SynthSpec {
            seed: 8,
            ..small_spec()
        })
        .unwrap();
        assert_ne!(a.token_streams, other.token_streams);
    }

    #[test]
    fn distributions_are_normalized() {
        let corpus = generate(&small_spec()).unwrap();
        for row in corpus.true_theta.rows() {
            assert_relative_eq!(row.sum(), 1.0, epsilon = 1e-12);
        }
        for row in corpus.true_beta.rows() {
            assert_relative_eq!(row.sum(), 1.0, epsilon = 1e-12);
        }

        let dirichlet = generate(&SynthSpec {
            structure: TopicStructure::Dirichlet,
            ..small_spec()
        })
        .unwrap();
        for row in dirichlet.true_beta.rows() {
            assert_relative_eq!(row.sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn matrix_agrees_with_token_streams() {
        let spec = small_spec();
        let corpus = generate(&spec).unwrap();
        assert_eq!(corpus.matrix.rows(), spec.docs);
        assert_eq!(corpus.matrix.cols(), spec.vocab_size);
        for (d, stream) in corpus.token_streams.iter().enumerate() {
            assert_eq!(stream.len(), 40);
            let mut histogram = BTreeMap::new();
            for &term in stream {
                *histogram.entry(term).or_insert(0u32) += 1;
            }
            let row: BTreeMap<u32, u32> = corpus.matrix.row(d).iter().copied().collect();
            assert_eq!(row, histogram, "document {d}");
        }

        let texts = corpus.texts();
        assert_eq!(texts.len(), spec.docs);
        assert!(texts.iter().all(|t| t.len() == 40));
        assert!(texts.iter().flatten().all(|w| w.starts_with('t')));
    }

    #[test]
    fn document_lengths_respect_the_range() {
        let corpus = generate(&SynthSpec {
            tokens_per_doc: TokensPerDoc::Range { min: 5, max: 12 },
            ..small_spec()
        })
        .unwrap();
        assert!(corpus
            .token_streams
            .iter()
            .all(|s| (5..=12).contains(&s.len())));
    }

    #[test]
    fn block_structure_has_the_advertised_shape() {
        let beta = block_beta(3, 30, 0.1);
        // Blocks of ten terms each: inside 0.9/10, outside 0.1/20.
        assert_relative_eq!(beta[[0, 0]], 0.09, epsilon = 1e-15);
        assert_relative_eq!(beta[[0, 9]], 0.09, epsilon = 1e-15);
        assert_relative_eq!(beta[[0, 10]], 0.005, epsilon = 1e-15);
        assert_relative_eq!(beta[[1, 10]], 0.09, epsilon = 1e-15);
        assert_relative_eq!(beta[[2, 29]], 0.09, epsilon = 1e-15);

        let sealed = block_beta(4, 21, 0.0);
        for k in 0..4 {
            let inside: usize = (0..21).filter(|&v| sealed[[k, v]] > 0.0).count();
            let start = k * 21 / 4;
            let end = (k + 1) * 21 / 4;
            assert_eq!(inside, end - start);
            assert_relative_eq!(sealed.row(k).sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn matching_truth_against_itself_is_perfect() {
        let corpus = generate(&small_spec()).unwrap();
        let matched = match_topics(&corpus.true_beta, &corpus.true_beta).unwrap();
        assert_relative_eq!(matched.mean_cosine, 1.0, epsilon = 1e-9);
        assert_eq!(matched.unmatched, 0);
        for &(learned, reference, cosine) in &matched.pairs {
            assert_eq!(learned, reference);
            assert_relative_eq!(cosine, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn random_rows_score_poorly_against_block_truth() {
        let spec = SynthSpec {
            k_true: 10,
            vocab_size: 500,
            ..SynthSpec::default()
        };
        let truth = block_beta(spec.k_true, spec.vocab_size, 0.05);
        let mut random = Array2::zeros((spec.k_true, spec.vocab_size));
        for topic in 0..spec.k_true {
            let mut rng = seeds::rng(99, &[seeds::TAG_SYNTH_BETA, topic as u64]);
            let row = dirichlet_sample(&mut rng, 0.1, spec.vocab_size).unwrap();
            for (slot, value) in random.row_mut(topic).iter_mut().zip(row) {
                *slot = value;
            }
        }
        let matched = match_topics(&random, &truth).unwrap();
        assert!(
            matched.mean_cosine < 0.3,
            "null matching scored {}",
            matched.mean_cosine
        );
    }

    #[test]
    fn unequal_topic_counts_leave_the_surplus_unmatched() {
        let truth = block_beta(4, 20, 0.0);
        let narrow = block_beta(2, 20, 0.0);
        let matched = match_topics(&narrow, &truth).unwrap();
        assert_eq!(matched.pairs.len(), 2);
        assert_eq!(matched.unmatched, 2);

        let mismatched = Array2::zeros((2, 7));
        assert!(match_topics(&mismatched, &truth).is_err());
    }
}
