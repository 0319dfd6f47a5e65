//! Online variational-Bayes LDA.
//!
//! For each mini-batch, a variational e-step fits per-document topic
//! posteriors gamma against the current topic-word parameters lambda, and
//! the m-step blends the batch's sufficient statistics into lambda with a
//! decaying step size rho_t = (tau0 + t)^(-kappa). With the step size
//! pinned to one and the corpus as a single batch, the same code performs
//! batch variational inference.

use ndarray::{Array2, Zip};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::{digamma, ln_gamma};
use crate::matrix::{DocTermMatrix, Vocabulary};
use crate::seeds;
use crate::Parallelism;

/// How the m-step blends batch statistics into lambda.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Decaying step size `(tau0 + t)^(-kappa)`.
    #[default]
    Online,
    /// Step size pinned to 1. With `batch_size >= corpus size` this is
    /// classic batch variational Bayes.
    BatchVb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub num_topics: usize,
    /// Symmetric document-topic Dirichlet prior.
    pub alpha: f64,
    /// Symmetric topic-word Dirichlet prior.
    pub eta: f64,
    /// Step-size offset.
    pub tau0: f64,
    /// Step-size decay exponent; (0.5, 1] for stochastic-approximation
    /// convergence.
    pub kappa: f64,
    pub batch_size: usize,
    pub e_step_max_iters: usize,
    /// Convergence threshold on the mean absolute change of gamma entries
    /// between e-step iterations.
    pub e_step_tol: f64,
    pub passes: usize,
    pub seed: u64,
    pub mode: UpdateMode,
}

impl LdaConfig {
    /// Defaults per the online-VB lineage: `alpha = eta = 1/K`,
    /// `tau0 = 1`, `kappa = 0.7`, batches of 2048, ten passes.
    pub fn new(num_topics: usize) -> Self {
        let k = num_topics.max(1) as f64;
        LdaConfig {
            num_topics,
            alpha: 1.0 / k,
            eta: 1.0 / k,
            tau0: 1.0,
            kappa: 0.7,
            batch_size: 2048,
            e_step_max_iters: 100,
            e_step_tol: 1e-3,
            passes: 10,
            seed: crate::defaults::SEED,
            mode: UpdateMode::Online,
        }
    }

    /// Same configuration with a different K and matching `1/K` priors.
    pub fn with_num_topics(&self, num_topics: usize) -> Self {
        let k = num_topics.max(1) as f64;
        LdaConfig {
            num_topics,
            alpha: 1.0 / k,
            eta: 1.0 / k,
            ..self.clone()
        }
    }

    /// Checks shared by training and inference-only models.
    fn validate_relaxed(&self) -> Result<()> {
        if self.num_topics == 0 {
            return Err(Error::config("num_topics must be at least 1"));
        }
        // NaN must fail these checks too, hence the is_nan arms.
        if self.alpha <= 0.0 || self.alpha.is_nan() || self.eta <= 0.0 || self.eta.is_nan() {
            return Err(Error::config(format!(
                "alpha and eta must be positive, got alpha = {}, eta = {}",
                self.alpha, self.eta
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.e_step_max_iters == 0 {
            return Err(Error::config("e_step_max_iters must be at least 1"));
        }
        if self.e_step_tol <= 0.0 || self.e_step_tol.is_nan() {
            return Err(Error::config("e_step_tol must be positive"));
        }
        if self.tau0 < 0.0 || self.tau0.is_nan() {
            return Err(Error::config("tau0 must be nonnegative"));
        }
        Ok(())
    }

    /// Full validation for training.
    pub fn validate(&self) -> Result<()> {
        self.validate_relaxed()?;
        if self.num_topics < 2 {
            return Err(Error::config("num_topics must be at least 2 for training"));
        }
        if !(self.kappa > 0.5 && self.kappa <= 1.0) {
            return Err(Error::config(format!(
                "kappa must lie in (0.5, 1], got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

/// Per-document inference result: raw variational parameters and the
/// normalized topic proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTopics {
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
}

impl DocTopics {
    fn from_gamma(gamma: Vec<f64>) -> Self {
        let total: f64 = gamma.iter().sum();
        let theta = gamma.iter().map(|&g| g / total).collect();
        DocTopics { gamma, theta }
    }
}

/// Result of one e-step over a mini-batch.
#[derive(Debug, Clone)]
pub struct EStepResult {
    /// Batch-size by K.
    pub gamma: Array2<f64>,
    /// K by V sufficient statistics: `sstats[k][w] = sum_d n_dw phi_dwk`.
    pub sstats: Array2<f64>,
}

/// `E[log x]` under `Dirichlet(param)`: `psi(param_k) - psi(sum param)`.
pub fn dirichlet_expectation(param: &[f64]) -> Result<Vec<f64>> {
    if param.is_empty() {
        return Err(Error::precondition(
            "dirichlet_expectation of an empty vector",
        ));
    }
    if let Some(&bad) = param.iter().find(|&&p| p <= 0.0 || p.is_nan()) {
        return Err(Error::precondition(format!(
            "dirichlet_expectation requires positive entries, got {bad}"
        )));
    }
    let mut out = vec![0.0; param.len()];
    dir_exp_into(param, &mut out);
    Ok(out)
}

fn dir_exp_into(param: &[f64], out: &mut [f64]) {
    let total = digamma(param.iter().sum());
    for (o, &p) in out.iter_mut().zip(param) {
        *o = digamma(p) - total;
    }
}

/// Row-wise Dirichlet expectation of a K by V parameter matrix.
fn elog_rows(params: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(params.raw_dim());
    for (mut orow, prow) in out.rows_mut().into_iter().zip(params.rows()) {
        let total = digamma(prow.sum());
        for (o, &p) in orow.iter_mut().zip(prow) {
            *o = digamma(p) - total;
        }
    }
    out
}

/// `exp(E[log beta])` with each column shifted by its maximum before
/// exponentiation. The shift cancels between the phi normalizer and the
/// statistics it scales, so gamma and sstats match the unshifted math
/// while the intermediate exponentials stay in a safe range.
fn exp_elog_beta_shifted(lambda: &Array2<f64>) -> Array2<f64> {
    let mut elog = elog_rows(lambda);
    let (k, v) = elog.dim();
    let mut shift = vec![f64::NEG_INFINITY; v];
    for row in elog.rows() {
        for (w, &x) in row.iter().enumerate() {
            if x > shift[w] {
                shift[w] = x;
            }
        }
    }
    for kk in 0..k {
        for w in 0..v {
            elog[(kk, w)] = (elog[(kk, w)] - shift[w]).exp();
        }
    }
    elog
}

/// Step size at update `t`.
fn learning_rate(tau0: f64, kappa: f64, t: u64) -> f64 {
    (tau0 + t as f64).powf(-kappa)
}

struct DocContribution {
    gamma: Vec<f64>,
    exp_elog_theta: Vec<f64>,
    ratio: Vec<f64>,
}

/// Coordinate-ascent loop for one document against a fixed shifted
/// `exp(E[log beta])`. Returns gamma plus the outer-product factors of the
/// document's contribution to the sufficient statistics.
fn doc_e_step(
    ids: &[u32],
    cts: &[f64],
    exp_elog_beta: &Array2<f64>,
    alpha: f64,
    max_iters: usize,
    tol: f64,
    gamma0: Vec<f64>,
) -> DocContribution {
    let k = gamma0.len();
    let words = ids.len();
    if words == 0 {
        return DocContribution {
            gamma: vec![alpha; k],
            exp_elog_theta: Vec::new(),
            ratio: Vec::new(),
        };
    }

    // Gather the document's beta columns into a dense word-major block so
    // the inner iterations stay contiguous.
    let mut betad = vec![0.0f64; words * k];
    for (j, &id) in ids.iter().enumerate() {
        let col = id as usize;
        for kk in 0..k {
            betad[j * k + kk] = exp_elog_beta[(kk, col)];
        }
    }

    let mut gamma = gamma0;
    let mut elog_theta = vec![0.0; k];
    let mut exp_theta = vec![0.0; k];
    dir_exp_into(&gamma, &mut elog_theta);
    for kk in 0..k {
        exp_theta[kk] = elog_theta[kk].exp();
    }

    let mut ratio = vec![0.0; words];
    let mut acc = vec![0.0; k];
    for _ in 0..max_iters {
        for j in 0..words {
            let row = &betad[j * k..(j + 1) * k];
            let mut norm = 0.0;
            for kk in 0..k {
                norm += exp_theta[kk] * row[kk];
            }
            ratio[j] = cts[j] / norm;
        }
        acc.fill(0.0);
        for j in 0..words {
            let r = ratio[j];
            let row = &betad[j * k..(j + 1) * k];
            for kk in 0..k {
                acc[kk] += r * row[kk];
            }
        }
        let mut mean_change = 0.0;
        for kk in 0..k {
            let updated = alpha + exp_theta[kk] * acc[kk];
            mean_change += (updated - gamma[kk]).abs();
            gamma[kk] = updated;
        }
        mean_change /= k as f64;
        dir_exp_into(&gamma, &mut elog_theta);
        for kk in 0..k {
            exp_theta[kk] = elog_theta[kk].exp();
        }
        if mean_change < tol {
            break;
        }
    }

    for j in 0..words {
        let row = &betad[j * k..(j + 1) * k];
        let mut norm = 0.0;
        for kk in 0..k {
            norm += exp_theta[kk] * row[kk];
        }
        ratio[j] = cts[j] / norm;
    }

    DocContribution {
        gamma,
        exp_elog_theta: exp_theta,
        ratio,
    }
}

#[derive(Debug, Clone)]
pub struct LdaModel {
    lambda: Array2<f64>,
    config: LdaConfig,
    vocabulary: Vocabulary,
    updates_seen: u64,
    docs_seen: u64,
    elbo_log: Vec<f64>,
}

impl LdaModel {
    /// A freshly seeded model: lambda entries drawn from Gamma(100, 0.01).
    /// `total_docs` is the corpus size the online schedule rescales
    /// batches to.
    pub fn init(vocabulary: Vocabulary, config: LdaConfig, total_docs: u64) -> Result<Self> {
        config.validate_relaxed()?;
        if vocabulary.is_empty() {
            return Err(Error::precondition(
                "cannot initialize a model on an empty vocabulary",
            ));
        }
        let k = config.num_topics;
        let v = vocabulary.len();
        let mut rng = seeds::rng(config.seed, &[seeds::TAG_LAMBDA_INIT]);
        let dist = Gamma::new(100.0, 0.01).expect("valid gamma parameters");
        let values: Vec<f64> = (0..k * v).map(|_| dist.sample(&mut rng)).collect();
        let lambda = Array2::from_shape_vec((k, v), values).expect("shape matches");
        Ok(LdaModel {
            lambda,
            config,
            vocabulary,
            updates_seen: 0,
            docs_seen: total_docs,
            elbo_log: Vec::new(),
        })
    }

    pub fn lambda(&self) -> &Array2<f64> {
        &self.lambda
    }

    pub fn config(&self) -> &LdaConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn num_topics(&self) -> usize {
        self.config.num_topics
    }

    pub fn updates_seen(&self) -> u64 {
        self.updates_seen
    }

    pub fn docs_seen(&self) -> u64 {
        self.docs_seen
    }

    /// Per-pass variational bound recorded by [`fit`]. Not persisted.
    pub fn elbo_log(&self) -> &[f64] {
        &self.elbo_log
    }

    /// Normalized topic-word distributions; each row sums to one.
    pub fn expected_beta(&self) -> Array2<f64> {
        let mut beta = self.lambda.clone();
        for mut row in beta.rows_mut() {
            let total = row.sum();
            row.mapv_inplace(|x| x / total);
        }
        beta
    }

    /// Variational e-step over a mini-batch of sparse rows. `batch_index`
    /// salts the per-document gamma initialization so every batch draws a
    /// fresh, schedule-independent stream. Documents are processed
    /// independently and merged in document order, so sequential and
    /// parallel execution produce bit-identical results.
    pub fn e_step(
        &self,
        docs: &[&[(u32, u32)]],
        batch_index: u64,
        parallelism: Parallelism,
    ) -> EStepResult {
        let k = self.config.num_topics;
        let v = self.vocabulary.len();
        let exp_elog_beta = exp_elog_beta_shifted(&self.lambda);
        let alpha = self.config.alpha;
        let max_iters = self.config.e_step_max_iters;
        let tol = self.config.e_step_tol;
        let seed = self.config.seed;

        let run_doc = |(pos, row): (usize, &&[(u32, u32)])| -> (Vec<u32>, DocContribution) {
            let ids: Vec<u32> = row.iter().map(|&(t, _)| t).collect();
            let cts: Vec<f64> = row.iter().map(|&(_, c)| c as f64).collect();
            let gamma0 = if ids.is_empty() {
                vec![alpha; k]
            } else {
                let mut rng = seeds::rng(seed, &[seeds::TAG_GAMMA_INIT, batch_index, pos as u64]);
                let dist = Gamma::new(100.0, 0.01).expect("valid gamma parameters");
                (0..k).map(|_| dist.sample(&mut rng)).collect()
            };
            let contribution =
                doc_e_step(&ids, &cts, &exp_elog_beta, alpha, max_iters, tol, gamma0);
            (ids, contribution)
        };

        let contributions: Vec<(Vec<u32>, DocContribution)> = match parallelism {
            Parallelism::Sequential => docs.iter().enumerate().map(run_doc).collect(),
            Parallelism::Rayon => {
                use rayon::prelude::*;
                docs.par_iter().enumerate().map(run_doc).collect()
            }
        };

        let mut gamma = Array2::zeros((docs.len(), k));
        let mut sstats = Array2::zeros((k, v));
        {
            let stats = sstats.as_slice_mut().expect("row-major layout");
            for (d, (ids, contribution)) in contributions.iter().enumerate() {
                for (kk, &g) in contribution.gamma.iter().enumerate() {
                    gamma[(d, kk)] = g;
                }
                for kk in 0..k {
                    let row = &mut stats[kk * v..(kk + 1) * v];
                    let weight = contribution
                        .exp_elog_theta
                        .get(kk)
                        .copied()
                        .unwrap_or_default();
                    for (j, &id) in ids.iter().enumerate() {
                        row[id as usize] += weight * contribution.ratio[j];
                    }
                }
            }
        }
        sstats *= &exp_elog_beta;

        EStepResult { gamma, sstats }
    }

    /// Blends batch statistics into lambda with the current step size and
    /// advances the update counter. An empty batch is a warned no-op.
    pub fn m_step_update(&mut self, sstats: &Array2<f64>, batch_docs: usize) -> Result<()> {
        if batch_docs == 0 {
            log::warn!("m-step called with an empty batch; skipping update");
            return Ok(());
        }
        if sstats.dim() != self.lambda.dim() {
            return Err(Error::precondition(format!(
                "sstats shape {:?} does not match lambda shape {:?}",
                sstats.dim(),
                self.lambda.dim()
            )));
        }
        let rho = match self.config.mode {
            UpdateMode::BatchVb => 1.0,
            UpdateMode::Online => {
                learning_rate(self.config.tau0, self.config.kappa, self.updates_seen)
            }
        };
        if !rho.is_finite() {
            return Err(Error::numeric(format!(
                "step size rho = {rho} at t = {} (tau0 = {}, kappa = {})",
                self.updates_seen, self.config.tau0, self.config.kappa
            )));
        }
        let scale = self.docs_seen as f64 / batch_docs as f64;
        let eta = self.config.eta;
        Zip::from(&mut self.lambda)
            .and(sstats)
            .for_each(|l, &s| *l = (1.0 - rho) * *l + rho * (eta + scale * s));
        if let Some(bad) = self.lambda.iter().find(|x| !x.is_finite() || **x <= 0.0) {
            return Err(Error::numeric(format!(
                "lambda left the positive reals after update {} (entry {bad})",
                self.updates_seen
            )));
        }
        self.updates_seen += 1;
        Ok(())
    }

    /// The standard variational bound on a set of documents given their
    /// fitted gammas, rescaled so per-document terms estimate the full
    /// corpus. Used for diagnostics and the batch-mode monotonicity check.
    pub fn approx_bound(&self, docs: &[&[(u32, u32)]], gamma: &Array2<f64>) -> f64 {
        let k = self.config.num_topics;
        let alpha = self.config.alpha;
        let eta = self.config.eta;
        let v = self.vocabulary.len();
        let elog_beta = elog_rows(&self.lambda);
        let elog_theta = elog_rows(gamma);

        let mut score = 0.0;
        for (d, row) in docs.iter().enumerate() {
            for &(w, ct) in row.iter() {
                let col = w as usize;
                let mut max = f64::NEG_INFINITY;
                for kk in 0..k {
                    let x = elog_theta[(d, kk)] + elog_beta[(kk, col)];
                    if x > max {
                        max = x;
                    }
                }
                let mut sum = 0.0;
                for kk in 0..k {
                    sum += (elog_theta[(d, kk)] + elog_beta[(kk, col)] - max).exp();
                }
                score += ct as f64 * (max + sum.ln());
            }
            let mut gamma_total = 0.0;
            for kk in 0..k {
                let g = gamma[(d, kk)];
                score += (alpha - g) * elog_theta[(d, kk)];
                score += ln_gamma(g) - ln_gamma(alpha);
                gamma_total += g;
            }
            score += ln_gamma(k as f64 * alpha) - ln_gamma(gamma_total);
        }
        score *= self.docs_seen as f64 / docs.len().max(1) as f64;

        for kk in 0..k {
            let mut lambda_total = 0.0;
            for w in 0..v {
                let l = self.lambda[(kk, w)];
                score += (eta - l) * elog_beta[(kk, w)];
                score += ln_gamma(l) - ln_gamma(eta);
                lambda_total += l;
            }
            score += ln_gamma(v as f64 * eta) - ln_gamma(lambda_total);
        }
        score
    }

    /// Infers topic proportions for one document with lambda frozen.
    pub fn transform(&self, doc: &[(u32, u32)]) -> Result<DocTopics> {
        Ok(self
            .transform_docs(&[doc], Parallelism::Sequential)?
            .remove(0))
    }

    /// Infers topic proportions for every row of a matrix built on the
    /// same vocabulary. Results match [`transform`] document by document.
    pub fn transform_batch(
        &self,
        matrix: &DocTermMatrix,
        parallelism: Parallelism,
    ) -> Result<Vec<DocTopics>> {
        if matrix.vocabulary().terms() != self.vocabulary.terms() {
            return Err(Error::precondition(
                "matrix vocabulary does not match the model vocabulary",
            ));
        }
        let docs: Vec<&[(u32, u32)]> = (0..matrix.rows()).map(|d| matrix.row(d)).collect();
        self.transform_docs(&docs, parallelism)
    }

    fn transform_docs(
        &self,
        docs: &[&[(u32, u32)]],
        parallelism: Parallelism,
    ) -> Result<Vec<DocTopics>> {
        let k = self.config.num_topics;
        let v = self.vocabulary.len() as u32;
        for row in docs {
            if let Some(&(bad, _)) = row.iter().find(|&&(t, _)| t >= v) {
                return Err(Error::precondition(format!(
                    "document references term id {bad} outside the {v}-term vocabulary"
                )));
            }
        }
        let exp_elog_beta = exp_elog_beta_shifted(&self.lambda);
        let alpha = self.config.alpha;
        let max_iters = self.config.e_step_max_iters;
        let tol = self.config.e_step_tol;

        // One shared seeded initialization keeps single-document and batch
        // inference identical for the same document.
        let mut rng = seeds::rng(self.config.seed, &[seeds::TAG_TRANSFORM]);
        let dist = Gamma::new(100.0, 0.01).expect("valid gamma parameters");
        let gamma0: Vec<f64> = (0..k).map(|_| dist.sample(&mut rng)).collect();

        let run_doc = |row: &&[(u32, u32)]| -> DocTopics {
            let ids: Vec<u32> = row.iter().map(|&(t, _)| t).collect();
            let cts: Vec<f64> = row.iter().map(|&(_, c)| c as f64).collect();
            let contribution = doc_e_step(
                &ids,
                &cts,
                &exp_elog_beta,
                alpha,
                max_iters,
                tol,
                gamma0.clone(),
            );
            DocTopics::from_gamma(contribution.gamma)
        };

        Ok(match parallelism {
            Parallelism::Sequential => docs.iter().map(run_doc).collect(),
            Parallelism::Rayon => {
                use rayon::prelude::*;
                docs.par_iter().map(run_doc).collect()
            }
        })
    }

    /// The `n` terms with largest expected beta in a topic, ties broken
    /// lexicographically. Asking for more than V terms returns all V.
    pub fn top_words(&self, topic: usize, n: usize) -> Result<Vec<(String, f64)>> {
        if topic >= self.config.num_topics {
            return Err(Error::precondition(format!(
                "topic {topic} out of range for {} topics",
                self.config.num_topics
            )));
        }
        let row = self.lambda.row(topic);
        let total = row.sum();
        let beta: Vec<f64> = row.iter().map(|&l| l / total).collect();
        let mut order: Vec<usize> = (0..beta.len()).collect();
        order.sort_by(|&a, &b| {
            beta[b]
                .total_cmp(&beta[a])
                .then_with(|| self.vocabulary.term(a).cmp(self.vocabulary.term(b)))
        });
        Ok(order
            .into_iter()
            .take(n.min(beta.len()))
            .map(|w| (self.vocabulary.term(w).to_string(), beta[w]))
            .collect())
    }

    /// Top-word lists for every topic, words only.
    pub fn top_word_lists(&self, n: usize) -> Result<Vec<Vec<String>>> {
        (0..self.config.num_topics)
            .map(|topic| {
                Ok(self
                    .top_words(topic, n)?
                    .into_iter()
                    .map(|(word, _)| word)
                    .collect())
            })
            .collect()
    }
}

/// Trains a model on the whole matrix: per pass, documents are shuffled
/// with a pass-derived seed and scanned in mini-batches, each followed by
/// an m-step. Records one averaged variational bound per pass.
pub fn fit(
    matrix: &DocTermMatrix,
    config: LdaConfig,
    parallelism: Parallelism,
) -> Result<LdaModel> {
    config.validate()?;
    if matrix.rows() == 0 {
        return Err(Error::precondition("cannot fit on a matrix with no rows"));
    }
    if matrix.cols() < config.num_topics {
        log::warn!(
            "vocabulary size {} is smaller than num_topics {}",
            matrix.cols(),
            config.num_topics
        );
    }

    let mut model = LdaModel::init(matrix.vocabulary().clone(), config, matrix.rows() as u64)?;

    for pass in 0..model.config.passes {
        let mut order: Vec<usize> = (0..matrix.rows()).collect();
        order.shuffle(&mut seeds::rng(
            model.config.seed,
            &[seeds::TAG_SHUFFLE, pass as u64],
        ));

        let mut bounds = Vec::new();
        for (batch_no, chunk) in order.chunks(model.config.batch_size).enumerate() {
            let docs: Vec<&[(u32, u32)]> = chunk.iter().map(|&d| matrix.row(d)).collect();
            let step = model.e_step(&docs, model.updates_seen, parallelism);
            model
                .m_step_update(&step.sstats, docs.len())
                .map_err(|e| Error::numeric(format!("pass {pass}, batch {batch_no}: {e}")))?;
            bounds.push(model.approx_bound(&docs, &step.gamma));
        }
        let pass_bound = bounds.iter().sum::<f64>() / bounds.len() as f64;
        model.elbo_log.push(pass_bound);
        log::debug!("pass {pass}: variational bound {pass_bound:.4}");
    }

    Ok(model)
}

const MODEL_MAGIC: &[u8; 8] = b"TFLDAMDL";
const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    format_version: u32,
    endianness: String,
    precision: String,
    num_topics: usize,
    vocab_size: usize,
    updates_seen: u64,
    docs_seen: u64,
    vocab_sha256: String,
    config: LdaConfig,
}

impl LdaModel {
    /// Serializes the model: magic, JSON header (config, vocabulary hash,
    /// counters, explicit endianness and precision), then lambda row-major
    /// as little-endian f64. The training-time bound log is diagnostic
    /// only and is not persisted.
    pub fn save(&self, mut writer: impl Write) -> Result<()> {
        let header = ModelHeader {
            format_version: MODEL_FORMAT_VERSION,
            endianness: "little".to_string(),
            precision: "f64".to_string(),
            num_topics: self.config.num_topics,
            vocab_size: self.vocabulary.len(),
            updates_seen: self.updates_seen,
            docs_seen: self.docs_seen,
            vocab_sha256: self.vocabulary.sha256_hex(),
            config: self.config.clone(),
        };
        let header_bytes = serde_json::to_vec(&header)?;
        writer.write_all(MODEL_MAGIC)?;
        writer.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
        writer.write_all(&header_bytes)?;
        for row in self.lambda.rows() {
            for &x in row {
                writer.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save_to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut writer = std::io::BufWriter::new(file);
        self.save(&mut writer)?;
        use std::io::Write as _;
        writer.flush()?;
        Ok(())
    }

    /// Loads a model saved by [`save`], validating the format header and
    /// that `vocabulary` hashes to the value recorded at save time.
    pub fn load(mut reader: impl Read, vocabulary: Vocabulary) -> Result<Self> {
        let mut magic = [0u8; 8];
        reader.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::malformed("not a model file (bad magic)"));
        }
        let mut len_bytes = [0u8; 4];
        reader.read_exact(&mut len_bytes)?;
        let header_len = u32::from_le_bytes(len_bytes) as usize;
        let mut header_bytes = vec![0u8; header_len];
        reader.read_exact(&mut header_bytes)?;
        let header: ModelHeader = serde_json::from_slice(&header_bytes)?;

        if header.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::malformed(format!(
                "unsupported model format version {}",
                header.format_version
            )));
        }
        if header.endianness != "little" || header.precision != "f64" {
            return Err(Error::malformed(format!(
                "unsupported model encoding: endianness {:?}, precision {:?}",
                header.endianness, header.precision
            )));
        }
        if header.num_topics != header.config.num_topics {
            return Err(Error::malformed(
                "model header topic count disagrees with its config",
            ));
        }
        if header.vocab_size != vocabulary.len() {
            return Err(Error::config(format!(
                "model was saved with {} vocabulary terms, got {}",
                header.vocab_size,
                vocabulary.len()
            )));
        }
        let hash = vocabulary.sha256_hex();
        if header.vocab_sha256 != hash {
            return Err(Error::config(
                "vocabulary hash mismatch: the model was trained on a different vocabulary",
            ));
        }
        header.config.validate_relaxed()?;

        let k = header.num_topics;
        let v = header.vocab_size;
        let mut payload = vec![0u8; k * v * 8];
        reader.read_exact(&mut payload)?;
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        if let Some(&bad) = values.iter().find(|x| !x.is_finite() || **x <= 0.0) {
            return Err(Error::malformed(format!(
                "model lambda contains a non-positive or non-finite entry ({bad})"
            )));
        }
        let lambda = Array2::from_shape_vec((k, v), values).expect("shape matches");

        Ok(LdaModel {
            lambda,
            config: header.config,
            vocabulary,
            updates_seen: header.updates_seen,
            docs_seen: header.docs_seen,
            elbo_log: Vec::new(),
        })
    }

    pub fn load_from_path(path: impl AsRef<Path>, vocabulary: Vocabulary) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::load(std::io::BufReader::new(file), vocabulary)
    }
}
