//! Implementations of the subcommands. Each one reads everything it
//! needs from a resolved [`Config`], so a run can be replayed from its
//! manifest alone.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;
use topicforge_core::corpus::{self, MetadataFilter, Note, RawRecord};
use topicforge_core::embed::{self, WordEmbeddings};
use topicforge_core::eval::{self, CoherenceConfig, SelectKOptions, SimilarityAggregation};
use topicforge_core::icd10;
use topicforge_core::io;
use topicforge_core::label::{self, LabelDictionary, StudyConfig};
use topicforge_core::lda::{LdaConfig, LdaModel, UpdateMode};
use topicforge_core::matrix::{self, DocTermMatrix, Vocabulary};
use topicforge_core::report::{self, format_value};
use topicforge_core::stats;
use topicforge_core::stopwords::StopwordList;
use topicforge_core::synth::{self, SynthSpec, TokensPerDoc, TopicStructure};
use topicforge_core::{Error, Parallelism, Result};

use crate::config::Config;

/// What a command consumed and produced, for the run manifest.
pub struct Execution {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub info: serde_json::Value,
}

pub fn execute(command: &str, cfg: &Config) -> Result<Execution> {
    match command {
        "ingest" => cmd_ingest(cfg),
        "freq" => cmd_freq(cfg),
        "select-k" => cmd_select_k(cfg),
        "fit" => cmd_fit(cfg),
        "transform" => cmd_transform(cfg),
        "coherence" => cmd_coherence(cfg),
        "label" => cmd_label(cfg),
        "proportions" => cmd_proportions(cfg),
        "synth" => cmd_synth(cfg),
        other => Err(Error::config(format!("unknown command {other:?}"))),
    }
}

fn out_dir(cfg: &Config) -> Result<PathBuf> {
    let dir = PathBuf::from(cfg.get("out_dir").unwrap_or("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn parallelism(cfg: &Config) -> Result<Parallelism> {
    if cfg.bool("deterministic")? {
        return Ok(Parallelism::Sequential);
    }
    match cfg.parse_opt::<usize>("threads")? {
        Some(n) if n > 1 => Ok(Parallelism::Rayon),
        _ => Ok(Parallelism::Sequential),
    }
}

fn write_tokens(path: &Path, docs: &[Vec<String>]) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    for doc in docs {
        writeln!(writer, "{}", doc.join(" "))?;
    }
    writer.flush()?;
    Ok(())
}

fn read_tokens(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(|line| line.split_whitespace().map(str::to_string).collect())
        .collect())
}

/// Loads notes for commands whose rows must align with a matrix; any
/// malformed record would silently shift the alignment, so all records
/// must parse.
fn load_notes(path: &Path) -> Result<Vec<Note>> {
    let records = io::read_notes_path(path)?;
    let mut notes = Vec::with_capacity(records.len());
    for record in records {
        match record {
            RawRecord::Valid(note) => notes.push(note),
            RawRecord::Malformed { context, reason } => {
                return Err(Error::malformed(format!(
                    "{}: {context}: {reason}; every record must parse so rows stay aligned with the matrix",
                    path.display()
                )));
            }
        }
    }
    Ok(notes)
}

/// Vocabulary files store terms only; document frequencies are not
/// needed by the model loader, whose integrity check hashes the terms.
fn load_vocabulary(path: &Path) -> Result<Vocabulary> {
    let terms = io::read_vocabulary_path(path)?;
    let frequencies = vec![0; terms.len()];
    Vocabulary::new(terms, frequencies)
}

fn load_matrix(cfg: &Config) -> Result<DocTermMatrix> {
    io::read_matrix_paths(cfg.path("matrix")?, cfg.path("vocab")?)
}

fn load_dictionary(cfg: &Config, inputs: &mut Vec<PathBuf>) -> Result<LabelDictionary> {
    match cfg.opt_path("dictionary") {
        Some(path) => {
            inputs.push(path.clone());
            LabelDictionary::load_from_path(&path)
        }
        None => Ok(LabelDictionary::bundled()),
    }
}

fn update_mode(cfg: &Config) -> Result<UpdateMode> {
    match cfg.get("mode").unwrap_or("online") {
        "online" => Ok(UpdateMode::Online),
        "batch" => Ok(UpdateMode::BatchVb),
        other => Err(Error::config(format!(
            "mode must be online or batch, got {other:?}"
        ))),
    }
}

fn aggregation(cfg: &Config) -> Result<SimilarityAggregation> {
    match cfg.get("similarity").unwrap_or("mean") {
        "mean" => Ok(SimilarityAggregation::Mean),
        "max" => Ok(SimilarityAggregation::Max),
        other => Err(Error::config(format!(
            "similarity must be mean or max, got {other:?}"
        ))),
    }
}

fn coherence_config(cfg: &Config) -> Result<CoherenceConfig> {
    Ok(CoherenceConfig {
        top_n: cfg.parse("top_n")?,
        window_size: cfg.parse("window")?,
        npmi_epsilon: cfg.parse("epsilon")?,
    })
}

/// Builds an [`LdaConfig`] from the resolved parameters. Keys a command
/// does not expose keep the library defaults; `alpha`/`eta` stay at the
/// `1/K` default unless set to something other than "auto".
fn lda_config(cfg: &Config, num_topics: usize) -> Result<LdaConfig> {
    let mut out = LdaConfig::new(num_topics);
    out.tau0 = cfg.parse("tau0")?;
    out.kappa = cfg.parse("kappa")?;
    out.batch_size = cfg.parse("batch_size")?;
    out.passes = cfg.parse("passes")?;
    out.seed = cfg.parse("seed")?;
    out.mode = update_mode(cfg)?;
    if let Some(iters) = cfg.parse_opt("e_step_max_iters")? {
        out.e_step_max_iters = iters;
    }
    if let Some(tol) = cfg.parse_opt("e_step_tol")? {
        out.e_step_tol = tol;
    }
    if !matches!(cfg.get("alpha"), None | Some("auto")) {
        out.alpha = cfg.parse("alpha")?;
    }
    if !matches!(cfg.get("eta"), None | Some("auto")) {
        out.eta = cfg.parse("eta")?;
    }
    Ok(out)
}

fn candidate_ks(cfg: &Config) -> Result<Vec<usize>> {
    let k_min: usize = cfg.parse("k_min")?;
    let k_max: usize = cfg.parse("k_max")?;
    let k_step: usize = cfg.parse("k_step")?;
    if k_step == 0 {
        return Err(Error::config("k-step must be at least 1"));
    }
    if k_min > k_max {
        return Err(Error::config(format!(
            "k-min {k_min} exceeds k-max {k_max}"
        )));
    }
    Ok((k_min..=k_max).step_by(k_step).collect())
}

/// Groups documents by a metadata field or by ICD-10 chapter. Chapter
/// grouping may place one document in several subsets; metadata grouping
/// partitions the corpus, with blank values pooled under "(none)".
fn build_subsets(notes: &[Note], subset_by: &str) -> Result<Vec<(String, Vec<usize>)>> {
    if notes.is_empty() {
        return Err(Error::precondition("no notes to group into subsets"));
    }
    if subset_by == "chapter" {
        let mut subsets = Vec::new();
        for chapter in icd10::analysis_chapters() {
            let docs: Vec<usize> = notes
                .iter()
                .enumerate()
                .filter(|(_, note)| note.icd10_codes.iter().any(|code| chapter.contains(code)))
                .map(|(idx, _)| idx)
                .collect();
            if docs.is_empty() {
                log::warn!(
                    "chapter {:?} has no documents, omitting it",
                    chapter.label()
                );
            } else {
                subsets.push((chapter.label(), docs));
            }
        }
        if subsets.is_empty() {
            return Err(Error::precondition(
                "no document carries a code from any analysis chapter",
            ));
        }
        return Ok(subsets);
    }
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (idx, note) in notes.iter().enumerate() {
        let raw = match subset_by {
            "note_type" => note.note_type.as_str(),
            "department" => note.department.as_str(),
            "specialty" => note.specialty.as_str(),
            "provider_type" => note.provider_type.as_str(),
            other => {
                return Err(Error::config(format!(
                    "subset-by must be note_type, department, specialty, provider_type, \
                     or chapter, got {other:?}"
                )));
            }
        };
        let value = raw.trim();
        let name = if value.is_empty() {
            "(none)".to_string()
        } else {
            value.to_string()
        };
        groups.entry(name).or_default().push(idx);
    }
    Ok(groups.into_iter().collect())
}

fn write_csv_path(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    report::write_csv(File::create(path)?, header, rows)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_ingest(cfg: &Config) -> Result<Execution> {
    let input = cfg.path("input")?;
    let dir = out_dir(cfg)?;
    let min_len: usize = cfg.parse("min_len")?;
    let min_df: usize = cfg.parse("min_df")?;
    let filter = match cfg.get("keyword") {
        Some(word) => MetadataFilter::keyword(word)?,
        None => MetadataFilter::none(),
    };
    let mut inputs = vec![input.clone()];
    let stopwords = match cfg.opt_path("stopwords") {
        Some(path) => {
            inputs.push(path.clone());
            StopwordList::from_file(&path)?
        }
        None => StopwordList::bundled(),
    };

    let records = io::read_notes_path(&input)?;
    let filtered = corpus::ingest(records, &filter);
    let final_corpus = corpus::filter_short_and_dedup(filtered, min_len);
    let provenance = final_corpus.provenance.clone();
    println!(
        "ingest: {} records in, {} rejected, {} after keyword filter, \
         {} short removed, {} duplicates removed, {} retained",
        provenance.input_records,
        provenance.rejected_records,
        provenance.after_keyword_filter,
        provenance.removed_short,
        provenance.removed_duplicates,
        provenance.retained
    );

    let corpus_path = dir.join("corpus.jsonl");
    io::write_notes_jsonl_path(&corpus_path, &final_corpus.notes)?;
    let tokens = corpus::tokenize_corpus(&final_corpus, &stopwords);
    let tokens_path = dir.join("tokens.txt");
    write_tokens(&tokens_path, &tokens)?;
    let mut outputs = vec![corpus_path, tokens_path];
    let mut vocabulary_size = 0;

    if final_corpus.is_empty() {
        log::warn!("the corpus is empty; matrix and vocabulary are not written");
    } else {
        let matrix = matrix::build_matrix_from_tokens(&tokens, min_df)?;
        vocabulary_size = matrix.cols();
        let matrix_path = dir.join("matrix.txt");
        io::write_matrix_path(&matrix_path, &matrix)?;
        let vocab_path = dir.join("vocab.txt");
        io::write_vocabulary_path(&vocab_path, matrix.vocabulary())?;
        println!(
            "matrix: {} documents x {} terms, {} nonzero cells",
            matrix.rows(),
            matrix.cols(),
            matrix.nnz()
        );
        outputs.push(matrix_path);
        outputs.push(vocab_path);
    }

    Ok(Execution {
        inputs,
        outputs,
        info: json!({ "provenance": provenance, "vocabulary_size": vocabulary_size }),
    })
}

fn cmd_freq(cfg: &Config) -> Result<Execution> {
    let notes_path = cfg.path("notes")?;
    let matrix_path = cfg.path("matrix")?;
    let vocab_path = cfg.path("vocab")?;
    let dir = out_dir(cfg)?;
    let top_k: usize = cfg.parse("top_k")?;
    let fraction: f64 = cfg.parse("frequent_fraction")?;

    let notes = load_notes(&notes_path)?;
    let matrix = load_matrix(cfg)?;
    let chapters = icd10::analysis_chapters();
    let (expanded, labeling) = stats::expand_by_chapter(&matrix, &notes, &chapters)?;
    if labeling.num_classes() < 2 {
        return Err(Error::precondition(format!(
            "only {} chapter has documents; the enrichment analysis needs at least 2",
            labeling.num_classes()
        )));
    }

    let exclusions = stats::frequent_terms(&expanded, fraction);
    let mut top_rows = Vec::new();
    let mut words = Vec::new();
    let mut seen = HashSet::new();
    for class_id in 0..labeling.num_classes() {
        let chapter = labeling.class_name(class_id).to_string();
        let top = stats::one_vs_rest_top_words(&expanded, &labeling, class_id, top_k, &exclusions)?;
        let listed: Vec<&str> = top.words.iter().map(|w| w.term.as_str()).collect();
        println!("{chapter}: {}", listed.join(", "));
        for (rank, word) in top.words.iter().enumerate() {
            top_rows.push(vec![
                chapter.clone(),
                (rank + 1).to_string(),
                word.term.clone(),
                format_value(word.statistic),
                format_value(word.p_value),
            ]);
            if seen.insert(word.term.clone()) {
                words.push(word.term.clone());
            }
        }
    }

    let top_words_path = dir.join("freq_top_words.csv");
    write_csv_path(
        &top_words_path,
        &["chapter", "rank", "term", "chi2", "p_value"],
        &top_rows,
    )?;

    let table = stats::word_frequency_table(&expanded, &labeling, &words)?;
    let mut table_rows = Vec::new();
    for class_id in 0..labeling.num_classes() {
        let mut row = vec![labeling.class_name(class_id).to_string()];
        row.extend(table.row(class_id).iter().map(|&v| format_value(v)));
        table_rows.push(row);
    }
    let mut header = vec!["chapter"];
    header.extend(words.iter().map(String::as_str));
    let table_path = dir.join("freq_table.csv");
    write_csv_path(&table_path, &header, &table_rows)?;

    let svg = report::heatmap_svg(
        "Enriched word frequency by ICD-10 chapter",
        labeling.class_names(),
        &words,
        &table,
    )?;
    let heatmap_path = dir.join("freq_heatmap.svg");
    write_text(&heatmap_path, &svg)?;

    Ok(Execution {
        inputs: vec![notes_path, matrix_path, vocab_path],
        outputs: vec![top_words_path, table_path, heatmap_path],
        info: json!({
            "chapters": labeling.num_classes(),
            "distinct_words": words.len(),
            "excluded_frequent_terms": exclusions.len(),
        }),
    })
}

fn cmd_select_k(cfg: &Config) -> Result<Execution> {
    let matrix_path = cfg.path("matrix")?;
    let vocab_path = cfg.path("vocab")?;
    let texts_path = cfg.path("texts")?;
    let dir = out_dir(cfg)?;

    let matrix = load_matrix(cfg)?;
    let texts = read_tokens(&texts_path)?;
    let candidates = candidate_ks(cfg)?;
    let template = lda_config(cfg, 2)?;
    let coherence = coherence_config(cfg)?;
    let options = SelectKOptions {
        repeats: cfg.parse("repeats")?,
        aggregation: aggregation(cfg)?,
        parallelism: parallelism(cfg)?,
    };

    let selection = eval::select_k(
        &matrix,
        &texts,
        &candidates,
        &template,
        &coherence,
        &options,
    )?;
    for (k, message) in &selection.failures {
        log::warn!("candidate K = {k} failed: {message}");
    }

    let rows: Vec<Vec<String>> = selection
        .runs
        .iter()
        .map(|run| {
            vec![
                run.k.to_string(),
                format_value(run.coherence),
                format_value(run.similarity),
                run.rank_coherence.to_string(),
                run.rank_similarity.to_string(),
                run.rank_sum().to_string(),
            ]
        })
        .collect();
    let csv_path = dir.join("select_k.csv");
    write_csv_path(
        &csv_path,
        &[
            "k",
            "coherence",
            "similarity",
            "rank_coherence",
            "rank_similarity",
            "rank_sum",
        ],
        &rows,
    )?;

    let svg = report::sweep_chart_svg(&selection.runs, selection.chosen_k)?;
    let svg_path = dir.join("select_k.svg");
    write_text(&svg_path, &svg)?;

    println!("chosen K = {}", selection.chosen_k);
    Ok(Execution {
        inputs: vec![matrix_path, vocab_path, texts_path],
        outputs: vec![csv_path, svg_path],
        info: json!({
            "chosen_k": selection.chosen_k,
            "candidates": candidates,
            "failures": selection.failures.len(),
        }),
    })
}

fn cmd_fit(cfg: &Config) -> Result<Execution> {
    let matrix_path = cfg.path("matrix")?;
    let vocab_path = cfg.path("vocab")?;
    let dir = out_dir(cfg)?;
    let k: usize = cfg.parse("k")?;
    let top_n: usize = cfg.parse("top_n")?;

    let matrix = load_matrix(cfg)?;
    let config = lda_config(cfg, k)?;
    let model = topicforge_core::lda::fit(&matrix, config, parallelism(cfg)?)?;

    let model_path = dir.join("model.bin");
    model.save_to_path(&model_path)?;

    let mut topic_rows = Vec::new();
    for topic in 0..model.num_topics() {
        for (rank, (term, weight)) in model.top_words(topic, top_n)?.into_iter().enumerate() {
            topic_rows.push(vec![
                topic.to_string(),
                (rank + 1).to_string(),
                term,
                format_value(weight),
            ]);
        }
    }
    let topics_path = dir.join("topics.csv");
    write_csv_path(
        &topics_path,
        &["topic", "rank", "term", "weight"],
        &topic_rows,
    )?;

    let elbo_rows: Vec<Vec<String>> = model
        .elbo_log()
        .iter()
        .enumerate()
        .map(|(pass, bound)| vec![(pass + 1).to_string(), format_value(*bound)])
        .collect();
    let elbo_path = dir.join("elbo.csv");
    write_csv_path(&elbo_path, &["pass", "bound"], &elbo_rows)?;

    let final_bound = model.elbo_log().last().copied();
    match final_bound {
        Some(bound) => println!("fit: K = {k}, final bound {}", format_value(bound)),
        None => println!("fit: K = {k}"),
    }

    Ok(Execution {
        inputs: vec![matrix_path, vocab_path],
        outputs: vec![model_path, topics_path, elbo_path],
        info: json!({ "k": k, "final_bound": final_bound }),
    })
}

fn cmd_transform(cfg: &Config) -> Result<Execution> {
    let model_path = cfg.path("model")?;
    let vocab_path = cfg.path("vocab")?;
    let matrix_path = cfg.path("matrix")?;
    let dir = out_dir(cfg)?;

    let matrix = load_matrix(cfg)?;
    let model = LdaModel::load_from_path(&model_path, matrix.vocabulary().clone())?;
    let doc_topics = model.transform_batch(&matrix, parallelism(cfg)?)?;

    let topic_headers: Vec<String> = (0..model.num_topics())
        .map(|k| format!("topic_{k}"))
        .collect();
    let mut header = vec!["doc"];
    header.extend(topic_headers.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = doc_topics
        .iter()
        .enumerate()
        .map(|(doc, topics)| {
            let mut row = vec![doc.to_string()];
            row.extend(topics.theta.iter().map(|&v| format_value(v)));
            row
        })
        .collect();
    let theta_path = dir.join("theta.csv");
    write_csv_path(&theta_path, &header, &rows)?;

    println!(
        "transform: {} documents x {} topics",
        doc_topics.len(),
        model.num_topics()
    );
    Ok(Execution {
        inputs: vec![model_path, vocab_path, matrix_path],
        outputs: vec![theta_path],
        info: json!({ "documents": doc_topics.len(), "topics": model.num_topics() }),
    })
}

fn cmd_coherence(cfg: &Config) -> Result<Execution> {
    let model_path = cfg.path("model")?;
    let vocab_path = cfg.path("vocab")?;
    let texts_path = cfg.path("texts")?;
    let dir = out_dir(cfg)?;
    let top_n: usize = cfg.parse("top_n")?;

    let model = LdaModel::load_from_path(&model_path, load_vocabulary(&vocab_path)?)?;
    let texts = read_tokens(&texts_path)?;
    let clusters = model.top_word_lists(top_n)?;
    let coherence = eval::topic_coherence(&clusters, &texts, &coherence_config(cfg)?)?;
    let similarity = eval::topic_similarity(&clusters, top_n, aggregation(cfg)?)?;

    let rows: Vec<Vec<String>> = coherence
        .per_topic
        .iter()
        .enumerate()
        .map(|(topic, score)| {
            vec![
                topic.to_string(),
                score.map(format_value).unwrap_or_default(),
            ]
        })
        .collect();
    let per_topic_path = dir.join("coherence.csv");
    write_csv_path(&per_topic_path, &["topic", "coherence"], &rows)?;

    let summary_rows = vec![
        vec!["mean_coherence".to_string(), format_value(coherence.mean)],
        vec!["topic_similarity".to_string(), format_value(similarity)],
    ];
    let summary_path = dir.join("coherence_summary.csv");
    write_csv_path(&summary_path, &["metric", "value"], &summary_rows)?;

    println!(
        "coherence: mean {}, similarity {}",
        format_value(coherence.mean),
        format_value(similarity)
    );
    if !coherence.skipped_topics.is_empty() {
        log::warn!(
            "{} topic(s) had fewer than two scorable words and were skipped",
            coherence.skipped_topics.len()
        );
    }

    Ok(Execution {
        inputs: vec![model_path, vocab_path, texts_path],
        outputs: vec![per_topic_path, summary_path],
        info: json!({
            "mean_coherence": coherence.mean,
            "topic_similarity": similarity,
            "skipped_topics": coherence.skipped_topics,
            "dropped_words": coherence.dropped_words.len(),
        }),
    })
}

/// Resolves the dictionary for labeling commands, running the embedding
/// expansion when requested. Returns the dictionary and, if expansion
/// ran, the path it was saved to.
fn prepare_dictionary(
    cfg: &Config,
    dir: &Path,
    inputs: &mut Vec<PathBuf>,
) -> Result<(LabelDictionary, Option<PathBuf>)> {
    let dictionary = load_dictionary(cfg, inputs)?;
    if !cfg.bool("expand")? {
        return Ok((dictionary, None));
    }

    let embeddings = match cfg.opt_path("embeddings") {
        Some(path) => {
            inputs.push(path.clone());
            WordEmbeddings::load_from_path(&path)?
        }
        None => {
            let matrix_path = cfg.opt_path("matrix").ok_or_else(|| {
                Error::config("--expand needs --embeddings, or --matrix to train embeddings from")
            })?;
            let matrix = io::read_matrix_paths(&matrix_path, cfg.path("vocab")?)?;
            if !inputs.contains(&matrix_path) {
                inputs.push(matrix_path);
            }
            embed::train_fallback_embeddings(
                &matrix,
                cfg.parse("embed_dim")?,
                cfg.parse("embed_window")?,
                cfg.parse("seed")?,
            )?
        }
    };
    let blocklist = match cfg.opt_path("blocklist") {
        Some(path) => {
            inputs.push(path.clone());
            let text = std::fs::read_to_string(&path)?;
            text.lines()
                .map(|line| line.trim().to_lowercase())
                .filter(|line| !line.is_empty() && !line.starts_with('#'))
                .collect()
        }
        None => label::default_blocklist(),
    };
    let expanded = label::expand_dictionary(
        &dictionary,
        &embeddings,
        cfg.parse("neighbors")?,
        &blocklist,
    )?;
    let path = dir.join("expanded_dictionary.tsv");
    expanded.save_to_path(&path)?;
    println!(
        "expanded dictionary: {} entries, {} words",
        expanded.len(),
        expanded
            .names()
            .map(|n| expanded.words(n).map_or(0, |words| words.len()))
            .sum::<usize>()
    );
    Ok((expanded, Some(path)))
}

fn cmd_label(cfg: &Config) -> Result<Execution> {
    let dir = out_dir(cfg)?;
    let vocab_path = cfg.path("vocab")?;
    let mut inputs = vec![vocab_path.clone()];
    let (dictionary, expanded_path) = prepare_dictionary(cfg, &dir, &mut inputs)?;
    let min_enrichment: f64 = cfg.parse("min_enrichment")?;
    let top_n: usize = cfg.parse("top_n")?;
    let mut outputs = Vec::new();
    if let Some(path) = expanded_path {
        outputs.push(path);
    }

    if cfg.bool("study")? {
        return cmd_label_study(cfg, dir, dictionary, inputs, outputs);
    }

    let model_path = cfg
        .opt_path("model")
        .ok_or_else(|| Error::config("label needs --model, or --study for the stability study"))?;
    inputs.push(model_path.clone());
    let model = LdaModel::load_from_path(&model_path, load_vocabulary(&vocab_path)?)?;
    let clusters = model.top_word_lists(top_n)?;
    let assignments = label::assign_labels(&clusters, &dictionary, min_enrichment)?;

    let mut rows = Vec::new();
    for assignment in &assignments {
        let (runner_up, runner_up_enrichment) = match &assignment.runner_up {
            Some((name, score)) => (name.clone(), format_value(*score)),
            None => (String::new(), String::new()),
        };
        println!(
            "topic {}: {} (enrichment {})",
            assignment.cluster_id,
            assignment.label_or_unlabeled(),
            format_value(assignment.enrichment)
        );
        rows.push(vec![
            assignment.cluster_id.to_string(),
            assignment.label_or_unlabeled().to_string(),
            format_value(assignment.enrichment),
            runner_up,
            runner_up_enrichment,
            clusters[assignment.cluster_id].join(" "),
        ]);
    }
    let labels_path = dir.join("labels.csv");
    write_csv_path(
        &labels_path,
        &[
            "cluster_id",
            "label",
            "enrichment",
            "runner_up",
            "runner_up_enrichment",
            "top_words",
        ],
        &rows,
    )?;
    outputs.insert(0, labels_path);

    let labeled = assignments
        .iter()
        .filter(|a| a.assigned_label.is_some())
        .count();
    Ok(Execution {
        inputs,
        outputs,
        info: json!({ "topics": assignments.len(), "labeled": labeled }),
    })
}

fn cmd_label_study(
    cfg: &Config,
    dir: PathBuf,
    dictionary: LabelDictionary,
    mut inputs: Vec<PathBuf>,
    mut outputs: Vec<PathBuf>,
) -> Result<Execution> {
    let matrix_path = cfg
        .opt_path("matrix")
        .ok_or_else(|| Error::config("label --study needs --matrix"))?;
    let texts_path = cfg
        .opt_path("texts")
        .ok_or_else(|| Error::config("label --study needs --texts"))?;
    let notes_path = cfg
        .opt_path("notes")
        .ok_or_else(|| Error::config("label --study needs --notes to define the subsets"))?;
    for path in [&matrix_path, &texts_path, &notes_path] {
        if !inputs.contains(path) {
            inputs.push(path.clone());
        }
    }

    let matrix = io::read_matrix_paths(&matrix_path, cfg.path("vocab")?)?;
    let texts = read_tokens(&texts_path)?;
    let notes = load_notes(&notes_path)?;
    if notes.len() != matrix.rows() {
        return Err(Error::precondition(format!(
            "{} notes but {} matrix rows; subsets cannot be aligned",
            notes.len(),
            matrix.rows()
        )));
    }
    let subsets = build_subsets(&notes, cfg.require("subset_by")?)?;
    let template = lda_config(cfg, 2)?;
    let study = StudyConfig {
        candidates: candidate_ks(cfg)?,
        repeats: cfg.parse("repeats")?,
        min_enrichment: cfg.parse("min_enrichment")?,
        coherence: coherence_config(cfg)?,
        select: SelectKOptions {
            aggregation: aggregation(cfg)?,
            parallelism: parallelism(cfg)?,
            ..SelectKOptions::default()
        },
    };

    let outcome = label::label_study(&matrix, &texts, &subsets, &dictionary, &template, &study)?;
    for (subset, run, message) in &outcome.errors {
        log::warn!("study subset {subset:?} run {run}: {message}");
    }

    let mut run_rows = Vec::new();
    for run in &outcome.runs {
        for assignment in &run.assignments {
            run_rows.push(vec![
                run.subset.clone(),
                run.run.to_string(),
                run.chosen_k.to_string(),
                assignment.cluster_id.to_string(),
                assignment.label_or_unlabeled().to_string(),
                format_value(assignment.enrichment),
            ]);
        }
    }
    let study_path = dir.join("study.csv");
    write_csv_path(
        &study_path,
        &[
            "subset",
            "run",
            "chosen_k",
            "cluster_id",
            "label",
            "enrichment",
        ],
        &run_rows,
    )?;

    let stability_rows: Vec<Vec<String>> = outcome
        .stability_table()
        .into_iter()
        .map(|(subset, label, count)| vec![subset, label, count.to_string()])
        .collect();
    let stability_path = dir.join("stability.csv");
    write_csv_path(
        &stability_path,
        &["subset", "label", "runs"],
        &stability_rows,
    )?;

    let selection_rows: Vec<Vec<String>> = outcome
        .selections
        .iter()
        .map(|(subset, selection)| vec![subset.clone(), selection.chosen_k.to_string()])
        .collect();
    let selection_path = dir.join("study_selection.csv");
    write_csv_path(&selection_path, &["subset", "chosen_k"], &selection_rows)?;

    outputs.splice(0..0, [study_path, stability_path, selection_path]);
    println!(
        "study: {} subsets, {} runs, {} failures",
        subsets.len(),
        outcome.runs.len(),
        outcome.errors.len()
    );
    Ok(Execution {
        inputs,
        outputs,
        info: json!({
            "subsets": subsets.len(),
            "runs": outcome.runs.len(),
            "failures": outcome.errors.len(),
        }),
    })
}

fn cmd_proportions(cfg: &Config) -> Result<Execution> {
    let model_path = cfg.path("model")?;
    let vocab_path = cfg.path("vocab")?;
    let matrix_path = cfg.path("matrix")?;
    let notes_path = cfg.path("notes")?;
    let dir = out_dir(cfg)?;
    let dominant = cfg.bool("dominant")?;
    let top_n: usize = cfg.parse("top_n")?;

    let matrix = load_matrix(cfg)?;
    let model = LdaModel::load_from_path(&model_path, matrix.vocabulary().clone())?;
    let notes = load_notes(&notes_path)?;
    if notes.len() != matrix.rows() {
        return Err(Error::precondition(format!(
            "{} notes but {} matrix rows; subsets cannot be aligned",
            notes.len(),
            matrix.rows()
        )));
    }

    let doc_topics = model.transform_batch(&matrix, parallelism(cfg)?)?;
    let subsets = build_subsets(&notes, cfg.require("subset_by")?)?;
    let (subset_names, table) = if dominant {
        report::subset_dominant_proportions(&doc_topics, &subsets)?
    } else {
        report::subset_mean_proportions(&doc_topics, &subsets)?
    };
    for row in table.rows() {
        let sum: f64 = row.sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::numeric(format!(
                "a subset's proportions sum to {sum}, expected 1"
            )));
        }
    }

    let mut inputs = vec![model_path, vocab_path, matrix_path, notes_path];
    let dictionary = load_dictionary(cfg, &mut inputs)?;
    let clusters = model.top_word_lists(top_n)?;
    let assignments = label::assign_labels(&clusters, &dictionary, cfg.parse("min_enrichment")?)?;
    let columns: Vec<String> = assignments
        .iter()
        .map(|a| format!("t{} {}", a.cluster_id, a.label_or_unlabeled()))
        .collect();

    let mut header = vec!["subset"];
    header.extend(columns.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = subset_names
        .iter()
        .enumerate()
        .map(|(idx, name)| {
            let mut row = vec![name.clone()];
            row.extend(table.row(idx).iter().map(|&v| format_value(v)));
            row
        })
        .collect();
    let csv_path = dir.join("proportions.csv");
    write_csv_path(&csv_path, &header, &rows)?;

    let title = if dominant {
        "Dominant topic share by subset"
    } else {
        "Mean topic proportion by subset"
    };
    let svg = report::bubble_grid_svg(title, &subset_names, &columns, &table)?;
    let svg_path = dir.join("proportions.svg");
    write_text(&svg_path, &svg)?;

    println!(
        "proportions: {} subsets x {} topics ({})",
        subset_names.len(),
        columns.len(),
        if dominant {
            "dominant share"
        } else {
            "mean theta"
        }
    );
    Ok(Execution {
        inputs,
        outputs: vec![csv_path, svg_path],
        info: json!({ "subsets": subset_names, "dominant": dominant }),
    })
}

fn cmd_synth(cfg: &Config) -> Result<Execution> {
    let dir = out_dir(cfg)?;
    let tokens_per_doc = match (cfg.parse_opt("tokens_min")?, cfg.parse_opt("tokens_max")?) {
        (Some(min), Some(max)) => TokensPerDoc::Range { min, max },
        (None, None) => TokensPerDoc::Fixed(cfg.parse("tokens")?),
        _ => {
            return Err(Error::config(
                "--tokens-min and --tokens-max must be given together",
            ));
        }
    };
    let structure = match cfg.require("structure")? {
        "block" => TopicStructure::Block {
            p_leak: cfg.parse("p_leak")?,
        },
        "dirichlet" => TopicStructure::Dirichlet,
        other => {
            return Err(Error::config(format!(
                "structure must be block or dirichlet, got {other:?}"
            )));
        }
    };
    let spec = SynthSpec {
        k_true: cfg.parse("k_true")?,
        vocab_size: cfg.parse("vocab_size")?,
        docs: cfg.parse("docs")?,
        tokens_per_doc,
        alpha_true: cfg.parse("alpha_true")?,
        eta_true: cfg.parse("eta_true")?,
        structure,
        seed: cfg.parse("seed")?,
    };

    let generated = synth::generate(&spec)?;
    let matrix_path = dir.join("matrix.txt");
    io::write_matrix_path(&matrix_path, &generated.matrix)?;
    let vocab_path = dir.join("vocab.txt");
    io::write_vocabulary_path(&vocab_path, generated.matrix.vocabulary())?;
    let tokens_path = dir.join("tokens.txt");
    write_tokens(&tokens_path, &generated.texts())?;

    let terms = generated.matrix.vocabulary().terms();
    let mut beta_header = vec!["topic"];
    beta_header.extend(terms.iter().map(String::as_str));
    let beta_rows: Vec<Vec<String>> = (0..spec.k_true)
        .map(|k| {
            let mut row = vec![k.to_string()];
            row.extend(generated.true_beta.row(k).iter().map(|&v| format_value(v)));
            row
        })
        .collect();
    let beta_path = dir.join("true_beta.csv");
    write_csv_path(&beta_path, &beta_header, &beta_rows)?;

    let mut theta_header = vec!["doc".to_string()];
    theta_header.extend((0..spec.k_true).map(|k| format!("topic_{k}")));
    let theta_header: Vec<&str> = theta_header.iter().map(String::as_str).collect();
    let theta_rows: Vec<Vec<String>> = (0..spec.docs)
        .map(|d| {
            let mut row = vec![d.to_string()];
            row.extend(generated.true_theta.row(d).iter().map(|&v| format_value(v)));
            row
        })
        .collect();
    let theta_path = dir.join("true_theta.csv");
    write_csv_path(&theta_path, &theta_header, &theta_rows)?;

    println!(
        "synth: {} documents, {} terms, {} planted topics",
        spec.docs, spec.vocab_size, spec.k_true
    );
    Ok(Execution {
        inputs: Vec::new(),
        outputs: vec![matrix_path, vocab_path, tokens_path, beta_path, theta_path],
        info: json!({ "k_true": spec.k_true, "docs": spec.docs, "vocab_size": spec.vocab_size }),
    })
}
