//! Topic evaluation: sliding-window co-occurrence statistics, NPMI, a
//! C_V-style coherence score, pairwise Jaccard topic similarity, and the
//! rank-sum selection of the number of topics.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lda::LdaConfig;
use crate::matrix::DocTermMatrix;
use crate::seeds;
use crate::Parallelism;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceConfig {
    /// Words per topic entering the score.
    pub top_n: usize,
    /// Sliding-window width in tokens.
    pub window_size: usize,
    /// Smoothing constant inside the NPMI logarithms.
    pub npmi_epsilon: f64,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig {
            top_n: crate::defaults::TOP_WORDS,
            window_size: crate::defaults::COHERENCE_WINDOW,
            npmi_epsilon: crate::defaults::NPMI_EPSILON,
        }
    }
}

impl CoherenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_n < 2 {
            return Err(Error::config("coherence top_n must be at least 2"));
        }
        if self.window_size < 2 {
            return Err(Error::config("coherence window_size must be at least 2"));
        }
        if self.npmi_epsilon <= 0.0 || self.npmi_epsilon.is_nan() {
            return Err(Error::config("npmi_epsilon must be positive"));
        }
        Ok(())
    }
}

/// Window-occurrence counts for a word subset: in how many sliding windows
/// each word, and each word pair, appears.
#[derive(Debug, Clone)]
pub struct WindowStats {
    index: HashMap<String, u32>,
    total_windows: u64,
    word_windows: Vec<u64>,
    pair_windows: HashMap<(u32, u32), u64>,
}

impl WindowStats {
    pub fn total_windows(&self) -> u64 {
        self.total_windows
    }

    /// P(word) = windows containing the word / total windows. `None` for
    /// words outside the counted subset.
    pub fn word_probability(&self, word: &str) -> Option<f64> {
        let &id = self.index.get(word)?;
        Some(self.word_windows[id as usize] as f64 / self.total_windows as f64)
    }

    /// P(a, b) = windows containing both / total windows. `None` when
    /// either word is outside the counted subset; zero when they never
    /// share a window.
    pub fn pair_probability(&self, a: &str, b: &str) -> Option<f64> {
        let &ia = self.index.get(a)?;
        let &ib = self.index.get(b)?;
        if ia == ib {
            return self.word_probability(a);
        }
        let key = (ia.min(ib), ia.max(ib));
        let count = self.pair_windows.get(&key).copied().unwrap_or(0);
        Some(count as f64 / self.total_windows as f64)
    }

    /// Number of counted subset words. Ids returned by the raw accessors
    /// index the subset in its original order.
    pub fn subset_len(&self) -> usize {
        self.word_windows.len()
    }

    pub fn word_window_count(&self, id: u32) -> u64 {
        self.word_windows[id as usize]
    }

    /// Raw co-occurrence counts for every pair that shared a window at
    /// least once, keyed by `(low_id, high_id)`.
    pub fn pair_window_counts(&self) -> impl Iterator<Item = ((u32, u32), u64)> + '_ {
        self.pair_windows.iter().map(|(&k, &v)| (k, v))
    }
}

/// Slides a `window_size`-wide window with stride one over every document
/// and counts, for each subset word and unordered pair, the number of
/// windows they occur in. Documents shorter than the window (including
/// empty ones) contribute a single window.
pub fn window_counts(
    texts: &[Vec<String>],
    subset: &[String],
    window_size: usize,
) -> Result<WindowStats> {
    if texts.is_empty() {
        return Err(Error::precondition("window_counts over an empty corpus"));
    }
    if window_size < 2 {
        return Err(Error::precondition("window_size must be at least 2"));
    }

    let mut index: HashMap<String, u32> = HashMap::new();
    for word in subset {
        let next = index.len() as u32;
        index.entry(word.clone()).or_insert(next);
    }

    let mut total_windows = 0u64;
    let mut word_windows = vec![0u64; index.len()];
    let mut pair_windows: HashMap<(u32, u32), u64> = HashMap::new();

    // Occupancy count per subset word within the current window, plus the
    // sorted set of present words for snapshotting.
    let mut occupancy = vec![0u32; index.len()];
    let mut present: BTreeSet<u32> = BTreeSet::new();

    let snapshot =
        |present: &BTreeSet<u32>, singles: &mut Vec<u64>, pairs: &mut HashMap<(u32, u32), u64>| {
            let ids: Vec<u32> = present.iter().copied().collect();
            for (i, &a) in ids.iter().enumerate() {
                singles[a as usize] += 1;
                for &b in &ids[i + 1..] {
                    *pairs.entry((a, b)).or_insert(0) += 1;
                }
            }
        };

    for doc in texts {
        let ids: Vec<Option<u32>> = doc.iter().map(|t| index.get(t.as_str()).copied()).collect();
        let len = ids.len();

        if len <= window_size {
            total_windows += 1;
            let distinct: BTreeSet<u32> = ids.iter().flatten().copied().collect();
            snapshot(&distinct, &mut word_windows, &mut pair_windows);
            continue;
        }

        occupancy.iter_mut().for_each(|c| *c = 0);
        present.clear();
        let add = |id: Option<u32>, occupancy: &mut Vec<u32>, present: &mut BTreeSet<u32>| {
            if let Some(id) = id {
                occupancy[id as usize] += 1;
                if occupancy[id as usize] == 1 {
                    present.insert(id);
                }
            }
        };
        let remove = |id: Option<u32>, occupancy: &mut Vec<u32>, present: &mut BTreeSet<u32>| {
            if let Some(id) = id {
                occupancy[id as usize] -= 1;
                if occupancy[id as usize] == 0 {
                    present.remove(&id);
                }
            }
        };

        for &id in &ids[..window_size] {
            add(id, &mut occupancy, &mut present);
        }
        total_windows += 1;
        snapshot(&present, &mut word_windows, &mut pair_windows);

        for start in 1..=(len - window_size) {
            remove(ids[start - 1], &mut occupancy, &mut present);
            add(ids[start + window_size - 1], &mut occupancy, &mut present);
            total_windows += 1;
            snapshot(&present, &mut word_windows, &mut pair_windows);
        }
    }

    Ok(WindowStats {
        index,
        total_windows,
        word_windows,
        pair_windows,
    })
}

/// Normalized pointwise mutual information,
/// `log((P_ij + eps) / (P_i P_j)) / -log(P_ij + eps)`, clamped to [-1, 1].
/// A pair that never co-occurs scores exactly -1 (the epsilon limit). A
/// marginal of zero makes the pair undefined and yields NaN; aggregators
/// exclude such pairs. `P_ij = 1` means both words sit in every window,
/// which is indistinguishable from independence here and scores 0.
pub fn npmi(p_i: f64, p_j: f64, p_ij: f64, epsilon: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p_i), "P_i = {p_i}");
    debug_assert!((0.0..=1.0).contains(&p_j), "P_j = {p_j}");
    debug_assert!((0.0..=1.0).contains(&p_ij), "P_ij = {p_ij}");
    if p_i <= 0.0 || p_j <= 0.0 {
        return f64::NAN;
    }
    if p_ij <= 0.0 {
        return -1.0;
    }
    if p_ij >= 1.0 {
        return 0.0;
    }
    let value = ((p_ij + epsilon) / (p_i * p_j)).ln() / -(p_ij + epsilon).ln();
    value.clamp(-1.0, 1.0)
}

#[derive(Debug, Clone)]
pub struct TopicCoherence {
    /// Per-topic scores; `None` marks topics skipped for having fewer than
    /// two words observable in the reference corpus.
    pub per_topic: Vec<Option<f64>>,
    /// Mean over scored topics.
    pub mean: f64,
    /// Words dropped per topic because the corpus never shows them.
    pub dropped_words: Vec<(usize, String)>,
    pub skipped_topics: Vec<usize>,
}

/// C_V-style coherence: for each topic's word set W, every word gets a
/// context vector of NPMI values against the members of W (self-entry 1);
/// the topic score is the mean cosine between each context vector and
/// their sum, and the model score is the mean over topics.
pub fn topic_coherence(
    word_lists: &[Vec<String>],
    texts: &[Vec<String>],
    config: &CoherenceConfig,
) -> Result<TopicCoherence> {
    config.validate()?;
    if word_lists.is_empty() {
        return Err(Error::precondition("no topics to score"));
    }

    let topic_words: Vec<Vec<String>> = word_lists
        .iter()
        .map(|list| {
            let mut seen = BTreeSet::new();
            list.iter()
                .take(config.top_n)
                .filter(|w| seen.insert(w.as_str().to_string()))
                .cloned()
                .collect()
        })
        .collect();

    let subset: Vec<String> = {
        let mut seen = BTreeSet::new();
        topic_words
            .iter()
            .flatten()
            .filter(|w| seen.insert(w.as_str().to_string()))
            .cloned()
            .collect()
    };
    let stats = window_counts(texts, &subset, config.window_size)?;

    let mut per_topic = Vec::with_capacity(topic_words.len());
    let mut dropped_words = Vec::new();
    let mut skipped_topics = Vec::new();

    for (topic, words) in topic_words.iter().enumerate() {
        let usable: Vec<&String> = words
            .iter()
            .filter(|w| {
                let present = stats.word_probability(w).unwrap_or(0.0) > 0.0;
                if !present {
                    log::warn!("topic {topic}: word {w:?} never occurs in the reference corpus");
                    dropped_words.push((topic, (*w).clone()));
                }
                present
            })
            .collect();

        if usable.len() < 2 {
            log::warn!("topic {topic} has fewer than two usable words; skipping");
            skipped_topics.push(topic);
            per_topic.push(None);
            continue;
        }

        let n = usable.len();
        let mut vectors = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            vectors[i][i] = 1.0;
            for j in (i + 1)..n {
                let p_i = stats.word_probability(usable[i]).unwrap_or(0.0);
                let p_j = stats.word_probability(usable[j]).unwrap_or(0.0);
                let p_ij = stats.pair_probability(usable[i], usable[j]).unwrap_or(0.0);
                let value = npmi(p_i, p_j, p_ij, config.npmi_epsilon);
                vectors[i][j] = value;
                vectors[j][i] = value;
            }
        }

        let mut sum = vec![0.0f64; n];
        for vector in &vectors {
            for (s, &x) in sum.iter_mut().zip(vector) {
                *s += x;
            }
        }

        let score = vectors
            .iter()
            .map(|vector| cosine(vector, &sum))
            .sum::<f64>()
            / n as f64;
        per_topic.push(Some(score));
    }

    let scored: Vec<f64> = per_topic.iter().flatten().copied().collect();
    if scored.is_empty() {
        return Err(Error::precondition(
            "every topic was skipped; no coherence is computable",
        ));
    }
    let mean = scored.iter().sum::<f64>() / scored.len() as f64;

    Ok(TopicCoherence {
        per_topic,
        mean,
        dropped_words,
        skipped_topics,
    })
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// How pairwise Jaccard values are reduced to one similarity number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityAggregation {
    #[default]
    Mean,
    Max,
}

/// Jaccard similarity of two sets; two empty sets count as identical.
fn jaccard(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let intersection = a.intersection(b).count();
    let union = a.len() + b.len() - intersection;
    intersection as f64 / union as f64
}

/// Aggregated Jaccard similarity over all unordered topic pairs, each
/// topic represented by its first `top_n` words as a set.
pub fn topic_similarity(
    word_lists: &[Vec<String>],
    top_n: usize,
    aggregation: SimilarityAggregation,
) -> Result<f64> {
    if word_lists.len() < 2 {
        return Err(Error::precondition(
            "topic similarity needs at least two topics",
        ));
    }
    let sets: Vec<BTreeSet<&str>> = word_lists
        .iter()
        .map(|list| list.iter().take(top_n).map(String::as_str).collect())
        .collect();

    let mut values = Vec::new();
    for i in 0..sets.len() {
        for j in (i + 1)..sets.len() {
            values.push(jaccard(&sets[i], &sets[j]));
        }
    }
    Ok(match aggregation {
        SimilarityAggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
        SimilarityAggregation::Max => values.iter().copied().fold(f64::MIN, f64::max),
    })
}

/// One sweep candidate with its scores and ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionRun {
    pub k: usize,
    pub coherence: f64,
    pub similarity: f64,
    /// 1 = highest coherence.
    pub rank_coherence: usize,
    /// 1 = lowest similarity.
    pub rank_similarity: usize,
}

impl KSelectionRun {
    pub fn rank_sum(&self) -> usize {
        self.rank_coherence + self.rank_similarity
    }
}

#[derive(Debug, Clone)]
pub struct KSelection {
    pub chosen_k: usize,
    /// Sweep table sorted by K.
    pub runs: Vec<KSelectionRun>,
    /// Candidates excluded because a fit or scoring step failed.
    pub failures: Vec<(usize, String)>,
}

#[derive(Debug, Clone)]
pub struct SelectKOptions {
    /// Independent fits averaged per candidate.
    pub repeats: usize,
    pub aggregation: SimilarityAggregation,
    pub parallelism: Parallelism,
}

impl Default for SelectKOptions {
    fn default() -> Self {
        SelectKOptions {
            repeats: 1,
            aggregation: SimilarityAggregation::Mean,
            parallelism: Parallelism::Sequential,
        }
    }
}

/// Ranks scored candidates and picks the winner: rank coherence
/// descending and similarity ascending (ties ordered toward smaller K),
/// then minimize the rank sum, final ties again toward smaller K.
/// Entries are `(k, coherence, similarity)`; the returned table is sorted
/// by K.
pub fn rank_and_choose(entries: &[(usize, f64, f64)]) -> Result<(usize, Vec<KSelectionRun>)> {
    if entries.is_empty() {
        return Err(Error::precondition("no candidates to rank"));
    }
    let mut ks: Vec<usize> = entries.iter().map(|e| e.0).collect();
    ks.sort_unstable();
    if ks.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::precondition("duplicate K among candidates"));
    }

    let n = entries.len();
    let mut by_coherence: Vec<usize> = (0..n).collect();
    by_coherence.sort_by(|&a, &b| {
        entries[b]
            .1
            .total_cmp(&entries[a].1)
            .then(entries[a].0.cmp(&entries[b].0))
    });
    let mut by_similarity: Vec<usize> = (0..n).collect();
    by_similarity.sort_by(|&a, &b| {
        entries[a]
            .2
            .total_cmp(&entries[b].2)
            .then(entries[a].0.cmp(&entries[b].0))
    });

    let mut rank_coherence = vec![0usize; n];
    for (rank, &idx) in by_coherence.iter().enumerate() {
        rank_coherence[idx] = rank + 1;
    }
    let mut rank_similarity = vec![0usize; n];
    for (rank, &idx) in by_similarity.iter().enumerate() {
        rank_similarity[idx] = rank + 1;
    }

    let mut runs: Vec<KSelectionRun> = entries
        .iter()
        .enumerate()
        .map(|(idx, &(k, coherence, similarity))| KSelectionRun {
            k,
            coherence,
            similarity,
            rank_coherence: rank_coherence[idx],
            rank_similarity: rank_similarity[idx],
        })
        .collect();
    runs.sort_by_key(|run| run.k);

    let chosen = runs
        .iter()
        .min_by_key(|run| (run.rank_sum(), run.k))
        .expect("nonempty")
        .k;
    Ok((chosen, runs))
}

/// A candidate's averaged (coherence, similarity) scores, or the reason
/// its fits were thrown out.
type CandidateOutcome = (usize, std::result::Result<(f64, f64), String>);

/// Sweeps the candidate topic counts: per candidate, fits `repeats`
/// independently seeded models (seed derived from the template seed, K,
/// and the repeat index), scores coherence and similarity on the training
/// texts, averages them, and ranks. Failed candidates are excluded with a
/// diagnostic; the sweep fails only if every candidate does.
pub fn select_k(
    matrix: &DocTermMatrix,
    texts: &[Vec<String>],
    candidates: &[usize],
    template: &LdaConfig,
    coherence_config: &CoherenceConfig,
    options: &SelectKOptions,
) -> Result<KSelection> {
    let mut ks: Vec<usize> = candidates.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.len() < 2 {
        return Err(Error::precondition(
            "select_k needs at least two distinct candidates",
        ));
    }
    if options.repeats == 0 {
        return Err(Error::config("select_k repeats must be at least 1"));
    }
    coherence_config.validate()?;

    let evaluate = |&k: &usize| -> CandidateOutcome {
        let mut coherence_sum = 0.0;
        let mut similarity_sum = 0.0;
        for repeat in 0..options.repeats {
            let config = LdaConfig {
                seed: seeds::derive(
                    template.seed,
                    &[seeds::TAG_SELECT_K, k as u64, repeat as u64],
                ),
                ..template.with_num_topics(k)
            };
            let outcome = crate::lda::fit(matrix, config, options.parallelism).and_then(|model| {
                let lists = model.top_word_lists(coherence_config.top_n)?;
                let coherence = topic_coherence(&lists, texts, coherence_config)?;
                let similarity =
                    topic_similarity(&lists, coherence_config.top_n, options.aggregation)?;
                Ok((coherence.mean, similarity))
            });
            match outcome {
                Ok((c, s)) => {
                    coherence_sum += c;
                    similarity_sum += s;
                }
                Err(e) => return (k, Err(format!("repeat {repeat}: {e}"))),
            }
        }
        let reps = options.repeats as f64;
        (k, Ok((coherence_sum / reps, similarity_sum / reps)))
    };

    let outcomes: Vec<CandidateOutcome> = match options.parallelism {
        Parallelism::Sequential => ks.iter().map(evaluate).collect(),
        Parallelism::Rayon => {
            use rayon::prelude::*;
            ks.par_iter().map(evaluate).collect()
        }
    };

    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (k, outcome) in outcomes {
        match outcome {
            Ok((coherence, similarity)) => entries.push((k, coherence, similarity)),
            Err(message) => {
                log::warn!("candidate K={k} excluded: {message}");
                failures.push((k, message));
            }
        }
    }
    if entries.is_empty() {
        let detail: Vec<String> = failures
            .iter()
            .map(|(k, m)| format!("K={k}: {m}"))
            .collect();
        return Err(Error::config(format!(
            "every candidate failed: {}",
            detail.join("; ")
        )));
    }

    let (chosen_k, runs) = rank_and_choose(&entries)?;
    Ok(KSelection {
        chosen_k,
        runs,
        failures,
    })
}
