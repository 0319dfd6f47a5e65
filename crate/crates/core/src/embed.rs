//! Word embeddings for dictionary expansion: either loaded from a plain
//! text file or trained on the corpus as a PPMI plus truncated-SVD
//! fallback.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{window_counts, WindowStats};
use crate::matrix::DocTermMatrix;
use crate::seeds;

/// Dense word vectors of a fixed dimension. Words carrying an all-zero
/// vector are treated as missing by every query.
#[derive(Debug, Clone)]
pub struct WordEmbeddings {
    dimension: usize,
    words: Vec<String>,
    index: HashMap<String, u32>,
    vectors: Array2<f64>,
}

impl WordEmbeddings {
    pub fn from_vectors(dimension: usize, entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::config("embedding dimension must be positive"));
        }
        let mut words = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        let mut vectors = Array2::zeros((entries.len(), dimension));
        for (row, (word, vector)) in entries.into_iter().enumerate() {
            if vector.len() != dimension {
                return Err(Error::malformed(format!(
                    "word {word:?} has dimension {}, expected {dimension}",
                    vector.len()
                )));
            }
            if index.insert(word.clone(), row as u32).is_some() {
                return Err(Error::malformed(format!(
                    "duplicate embedding for {word:?}"
                )));
            }
            for (slot, value) in vectors.row_mut(row).iter_mut().zip(vector) {
                *slot = value;
            }
            words.push(word);
        }
        Ok(WordEmbeddings {
            dimension,
            words,
            index,
            vectors,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// The word's vector, or `None` if the word is unknown or its vector
    /// is all zeros.
    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        let &row = self.index.get(word)?;
        let vector = self
            .vectors
            .row(row as usize)
            .to_slice()
            .expect("row-major storage");
        if vector.iter().all(|&x| x == 0.0) {
            None
        } else {
            Some(vector)
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vector(word).is_some()
    }

    /// The `n` vocabulary words most cosine-similar to `word`, excluding
    /// the word itself, sorted by similarity descending then word
    /// ascending. Empty when the word is missing.
    pub fn nearest(&self, word: &str, n: usize) -> Vec<(String, f64)> {
        let Some(query) = self.vector(word) else {
            return Vec::new();
        };
        let mut scored: Vec<(String, f64)> = self
            .words
            .iter()
            .filter(|candidate| candidate.as_str() != word)
            .filter_map(|candidate| {
                let vector = self.vector(candidate)?;
                Some((candidate.clone(), cosine(query, vector)))
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(n);
        scored
    }

    /// Text format: a "vocab_size dimension" header line, then one
    /// "word v1 ... vd" line per word.
    pub fn save_text<W: Write>(&self, writer: W) -> Result<()> {
        let mut writer = BufWriter::new(writer);
        writeln!(writer, "{} {}", self.words.len(), self.dimension)?;
        for (row, word) in self.words.iter().enumerate() {
            write!(writer, "{word}")?;
            for value in self.vectors.row(row) {
                write!(writer, " {value}")?;
            }
            writeln!(writer)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn save_to_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.save_text(std::fs::File::create(path)?)
    }

    pub fn load_text<R: Read>(reader: R) -> Result<Self> {
        let reader = BufReader::new(reader);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::malformed("embedding file is empty"))??;
        let mut parts = header.split_whitespace();
        let vocab_size: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::malformed("embedding header needs a vocabulary size"))?;
        let dimension: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::malformed("embedding header needs a dimension"))?;
        if parts.next().is_some() {
            return Err(Error::malformed("embedding header has trailing fields"));
        }

        let mut entries = Vec::with_capacity(vocab_size);
        for (number, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields
                .next()
                .ok_or_else(|| Error::malformed(format!("embedding line {} is blank", number + 2)))?
                .to_string();
            let vector: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| {
                        Error::malformed(format!(
                            "embedding line {}: {f:?} is not a number",
                            number + 2
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            entries.push((word, vector));
        }
        if entries.len() != vocab_size {
            return Err(Error::malformed(format!(
                "embedding header promises {vocab_size} words but the file holds {}",
                entries.len()
            )));
        }
        WordEmbeddings::from_vectors(dimension, entries)
    }

    pub fn load_from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        WordEmbeddings::load_text(std::fs::File::open(path)?)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Symmetric sparse matrix with both triangles stored per row.
pub(crate) struct SparseSym {
    n: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

impl SparseSym {
    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            y[i] = row.iter().map(|&(j, v)| v * x[j as usize]).sum();
        }
    }

    #[cfg(test)]
    fn frobenius_squared(&self) -> f64 {
        self.rows.iter().flatten().map(|&(_, v)| v * v).sum()
    }
}

/// Positive PMI matrix over the counted subset:
/// `max(0, ln(P_ij / (P_i P_j)))`, including the diagonal.
pub(crate) fn ppmi_from_windows(stats: &WindowStats) -> SparseSym {
    let n = stats.subset_len();
    let total = stats.total_windows() as f64;
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];

    for i in 0..n as u32 {
        let count = stats.word_window_count(i);
        if count == 0 {
            continue;
        }
        let p = count as f64 / total;
        let value = -p.ln();
        if value > 0.0 {
            rows[i as usize].push((i, value));
        }
    }
    for ((i, j), count) in stats.pair_window_counts() {
        let p_ij = count as f64 / total;
        let p_i = stats.word_window_count(i) as f64 / total;
        let p_j = stats.word_window_count(j) as f64 / total;
        let value = (p_ij / (p_i * p_j)).ln();
        if value > 0.0 {
            rows[i as usize].push((j, value));
            rows[j as usize].push((i, value));
        }
    }
    for row in &mut rows {
        row.sort_unstable_by_key(|&(j, _)| j);
    }
    SparseSym { n, rows }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Columns that
/// collapse to zero are replaced by fresh random directions so the basis
/// stays full rank.
fn orthonormalize_columns(q: &mut Array2<f64>, rng: &mut ChaCha8Rng) {
    let (n, b) = q.dim();
    for j in 0..b {
        loop {
            for _ in 0..2 {
                for i in 0..j {
                    let dot: f64 = (0..n).map(|r| q[[r, i]] * q[[r, j]]).sum();
                    for r in 0..n {
                        q[[r, j]] -= dot * q[[r, i]];
                    }
                }
            }
            let norm: f64 = (0..n).map(|r| q[[r, j]] * q[[r, j]]).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for r in 0..n {
                    q[[r, j]] /= norm;
                }
                break;
            }
            for r in 0..n {
                q[[r, j]] = standard_normal(rng);
            }
        }
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; the tiny offset keeps the logarithm finite.
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix. Returns
/// eigenvalues and the orthogonal matrix of column eigenvectors.
fn jacobi_eigen(mut a: Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut v: Array2<f64> = Array2::eye(n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[[p, q]] * a[[p, q]])
            .sum();
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[[r, p]];
                    let arq = a[[r, q]];
                    a[[r, p]] = c * arp - s * arq;
                    a[[r, q]] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[[p, r]];
                    let aqr = a[[q, r]];
                    a[[p, r]] = c * apr - s * aqr;
                    a[[q, r]] = s * apr + c * aqr;
                }
                for r in 0..n {
                    let vrp = v[[r, p]];
                    let vrq = v[[r, q]];
                    v[[r, p]] = c * vrp - s * vrq;
                    v[[r, q]] = s * vrp + c * vrq;
                }
            }
        }
    }
    let eigenvalues = (0..n).map(|i| a[[i, i]]).collect();
    (eigenvalues, v)
}

/// Truncated factorization of a symmetric matrix by subspace iteration
/// with Rayleigh-Ritz extraction. Returns `(vectors, singular_values)`
/// where `vectors` is n x dim holding eigenvector columns scaled by the
/// square root of the singular value, ordered by singular value
/// descending.
pub(crate) fn truncated_symmetric_factorization(
    matrix: &SparseSym,
    dim: usize,
    seed: u64,
) -> (Array2<f64>, Vec<f64>) {
    let n = matrix.n;
    let oversample = 8usize;
    let block = (dim + oversample).min(n);
    let mut rng = seeds::rng(seed, &[seeds::TAG_EMBED]);

    let mut q = Array2::zeros((n, block));
    for value in q.iter_mut() {
        *value = standard_normal(&mut rng);
    }
    orthonormalize_columns(&mut q, &mut rng);

    let mut x = vec![0.0f64; n];
    let mut y = vec![0.0f64; n];
    for _iteration in 0..30 {
        let mut z = Array2::zeros((n, block));
        for c in 0..block {
            for r in 0..n {
                x[r] = q[[r, c]];
            }
            matrix.matvec(&x, &mut y);
            for r in 0..n {
                z[[r, c]] = y[r];
            }
        }
        q = z;
        orthonormalize_columns(&mut q, &mut rng);
    }

    // Rayleigh-Ritz: T = Q^T M Q, then rotate Q by T's eigenvectors.
    let mut mq = Array2::zeros((n, block));
    for c in 0..block {
        for r in 0..n {
            x[r] = q[[r, c]];
        }
        matrix.matvec(&x, &mut y);
        for r in 0..n {
            mq[[r, c]] = y[r];
        }
    }
    let mut t = Array2::zeros((block, block));
    for i in 0..block {
        for j in 0..block {
            t[[i, j]] = (0..n).map(|r| q[[r, i]] * mq[[r, j]]).sum();
        }
    }
    // Symmetrize away round-off before the eigensolve.
    for i in 0..block {
        for j in (i + 1)..block {
            let mean = 0.5 * (t[[i, j]] + t[[j, i]]);
            t[[i, j]] = mean;
            t[[j, i]] = mean;
        }
    }
    let (eigenvalues, rotation) = jacobi_eigen(t);

    let mut order: Vec<usize> = (0..block).collect();
    order.sort_by(|&a, &b| eigenvalues[b].abs().total_cmp(&eigenvalues[a].abs()));
    let keep = dim.min(block);

    let mut vectors = Array2::zeros((n, keep));
    let mut singular_values = Vec::with_capacity(keep);
    for (out, &idx) in order[..keep].iter().enumerate() {
        let sigma = eigenvalues[idx].abs();
        singular_values.push(sigma);
        let weight = sigma.sqrt();
        for r in 0..n {
            let coord: f64 = (0..block).map(|c| q[[r, c]] * rotation[[c, idx]]).sum();
            vectors[[r, out]] = weight * coord;
        }
    }
    (vectors, singular_values)
}

/// Trains fallback embeddings on the corpus itself: expands each
/// document row into a token stream (term-id order), counts sliding
/// windows over it, forms the positive PMI matrix, and truncates it with
/// a seeded subspace-iteration SVD. A dimension above the vocabulary
/// size is clamped with a warning.
pub fn train_fallback_embeddings(
    matrix: &DocTermMatrix,
    dimension: usize,
    window_size: usize,
    seed: u64,
) -> Result<WordEmbeddings> {
    if matrix.rows() == 0 {
        return Err(Error::precondition(
            "cannot train embeddings on an empty corpus",
        ));
    }
    if dimension == 0 {
        return Err(Error::config("embedding dimension must be positive"));
    }
    let vocab = matrix.vocabulary();
    let dimension = if dimension > vocab.len() {
        log::warn!(
            "embedding dimension {dimension} exceeds the vocabulary size {}; clamping",
            vocab.len()
        );
        vocab.len()
    } else {
        dimension
    };

    // The matrix has no token order, so each row is expanded with terms
    // repeated by count. With the usual window sizes this reduces to
    // document-level co-occurrence.
    let texts: Vec<Vec<String>> = (0..matrix.rows())
        .map(|d| {
            matrix
                .row(d)
                .iter()
                .flat_map(|&(term, count)| {
                    std::iter::repeat_n(vocab.terms()[term as usize].clone(), count as usize)
                })
                .collect()
        })
        .collect();
    let stats = window_counts(&texts, vocab.terms(), window_size)?;
    let ppmi = ppmi_from_windows(&stats);
    let (vectors, _) = truncated_symmetric_factorization(&ppmi, dimension, seed);

    let entries: Vec<(String, Vec<f64>)> = vocab
        .terms()
        .iter()
        .enumerate()
        .map(|(row, term)| (term.clone(), vectors.row(row).to_vec()))
        .collect();
    WordEmbeddings::from_vectors(dimension, entries)
}
