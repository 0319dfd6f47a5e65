//! Declarative parameter tables for every subcommand. One table drives
//! the clap definition, the config-file validation, and the defaults, so
//! the three can never disagree.

use crate::config::{CommandSpec, ParamSpec};

const OUT_DIR: ParamSpec = ParamSpec::with_default(
    "out_dir",
    "Directory for output files, created if missing",
    ".",
);
const SEED: ParamSpec = ParamSpec::with_default("seed", "Base random seed", "42");
const THREADS: ParamSpec = ParamSpec::optional(
    "threads",
    "Worker threads for parallel stages (TOPICFORGE_THREADS is the fallback); omit for sequential",
);
const DETERMINISTIC: ParamSpec = ParamSpec::flag(
    "deterministic",
    "Force sequential execution for bit-identical reruns",
);
const TOP_N: ParamSpec = ParamSpec::with_default(
    "top_n",
    "Top words per topic used for scoring and display",
    "10",
);
const WINDOW: ParamSpec = ParamSpec::with_default(
    "window",
    "Sliding-window width for co-occurrence counting",
    "110",
);
const EPSILON: ParamSpec = ParamSpec::with_default(
    "epsilon",
    "Smoothing constant inside the NPMI logarithms",
    "1e-12",
);
const SIMILARITY: ParamSpec = ParamSpec::with_default(
    "similarity",
    "Pairwise topic-overlap aggregation: mean or max",
    "mean",
);
const BATCH_SIZE: ParamSpec =
    ParamSpec::with_default("batch_size", "Documents per online update", "2048");
const PASSES: ParamSpec = ParamSpec::with_default("passes", "Full passes over the corpus", "10");
const KAPPA: ParamSpec =
    ParamSpec::with_default("kappa", "Learning-rate decay exponent, in (0.5, 1]", "0.7");
const TAU0: ParamSpec = ParamSpec::with_default("tau0", "Learning-rate delay offset", "1");
const MODE: ParamSpec = ParamSpec::with_default(
    "mode",
    "Update schedule: online (decaying step) or batch (step pinned to 1)",
    "online",
);
const K_MIN: ParamSpec = ParamSpec::with_default("k_min", "Smallest candidate topic count", "10");
const K_MAX: ParamSpec =
    ParamSpec::with_default("k_max", "Largest candidate topic count, inclusive", "50");
const K_STEP: ParamSpec =
    ParamSpec::with_default("k_step", "Stride through the candidate range", "5");
const DICTIONARY: ParamSpec = ParamSpec::optional(
    "dictionary",
    "Label dictionary TSV; the bundled dictionary is used when omitted",
);
const MIN_ENRICHMENT: ParamSpec = ParamSpec::with_default(
    "min_enrichment",
    "Smallest enrichment that still assigns a label; 0 always assigns",
    "0",
);
const SUBSET_BY: ParamSpec = ParamSpec::with_default(
    "subset_by",
    "Document grouping: note_type, department, specialty, provider_type, or chapter",
    "note_type",
);

pub const COMMANDS: &[CommandSpec] = &[
    CommandSpec {
        name: "ingest",
        about: "Read notes, filter them, and write the corpus, tokens, matrix, and vocabulary",
        params: &[
            ParamSpec::required("input", "Notes file (.jsonl or .csv)"),
            ParamSpec::with_default(
                "min_len",
                "Drop notes shorter than this many characters",
                "30",
            ),
            ParamSpec::with_default(
                "min_df",
                "Drop terms appearing in fewer than this many documents",
                "2",
            ),
            ParamSpec::optional(
                "keyword",
                "Keep only notes whose metadata mentions this keyword (case-insensitive)",
            ),
            ParamSpec::optional(
                "stopwords",
                "Stopword file, one word per line; the bundled list is used when omitted",
            ),
            OUT_DIR,
        ],
    },
    CommandSpec {
        name: "freq",
        about: "Rank chi-squared enriched words per ICD-10 chapter and plot their frequencies",
        params: &[
            ParamSpec::required(
                "notes",
                "Corpus notes (.jsonl) aligned with the matrix rows",
            ),
            ParamSpec::required("matrix", "Sparse document-term matrix file"),
            ParamSpec::required("vocab", "Vocabulary file, one term per line"),
            ParamSpec::with_default("top_k", "Enriched words reported per chapter", "5"),
            ParamSpec::with_default(
                "frequent_fraction",
                "Exclude terms present in more than this fraction of documents",
                "0.5",
            ),
            OUT_DIR,
        ],
    },
    CommandSpec {
        name: "select-k",
        about: "Sweep candidate topic counts and pick one by coherence/similarity rank sum",
        params: &[
            ParamSpec::required("matrix", "Sparse document-term matrix file"),
            ParamSpec::required("vocab", "Vocabulary file, one term per line"),
            ParamSpec::required(
                "texts",
                "Token file, one whitespace-joined document per line",
            ),
            K_MIN,
            K_MAX,
            K_STEP,
            ParamSpec::with_default("repeats", "Fits averaged per candidate", "1"),
            TOP_N,
            WINDOW,
            EPSILON,
            SIMILARITY,
            BATCH_SIZE,
            PASSES,
            KAPPA,
            TAU0,
            MODE,
            SEED,
            THREADS,
            DETERMINISTIC,
            OUT_DIR,
        ],
    },
    CommandSpec {
        name: "fit",
        about: "Fit a topic model and write the model, top words, and bound trace",
        params: &[
            ParamSpec::required("matrix", "Sparse document-term matrix file"),
            ParamSpec::required("vocab", "Vocabulary file, one term per line"),
            ParamSpec::required("k", "Number of topics"),
            ParamSpec::with_default("alpha", "Document-topic prior; auto means 1/K", "auto"),
            ParamSpec::with_default("eta", "Topic-word prior; auto means 1/K", "auto"),
            TAU0,
            KAPPA,
            BATCH_SIZE,
            ParamSpec::with_default(
                "e_step_max_iters",
                "Cap on per-document E-step iterations",
                "100",
            ),
            ParamSpec::with_default(
                "e_step_tol",
                "Mean absolute gamma change that stops the E-step",
                "1e-3",
            ),
            PASSES,
            MODE,
            TOP_N,
            SEED,
            THREADS,
            DETERMINISTIC,
            OUT_DIR,
        ],
    },
    CommandSpec {
        name: "transform",
        about: "Infer per-document topic proportions under a fitted model",
        params: &[
            ParamSpec::required("model", "Fitted model file"),
            ParamSpec::required("vocab", "Vocabulary file the model was fitted with"),
            ParamSpec::required("matrix", "Sparse document-term matrix file"),
            THREADS,
            DETERMINISTIC,
            OUT_DIR,
        ],
    },
    CommandSpec {
        name: "coherence",
        about: "Score a fitted model's topics by sliding-window coherence and topic overlap",
        params: &[
            ParamSpec::required("model", "Fitted model file"),
            ParamSpec::required("vocab", "Vocabulary file the model was fitted with"),
            ParamSpec::required(
                "texts",
                "Token file, one whitespace-joined document per line",
            ),
            TOP_N,
            WINDOW,
            EPSILON,
            SIMILARITY,
            OUT_DIR,
        ],
    },
    CommandSpec {
        name: "label",
        about: "Name topics from a dictionary, optionally expanded with word embeddings",
        params: &[
            ParamSpec::optional("model", "Fitted model file (required unless --study)"),
            ParamSpec::required("vocab", "Vocabulary file, one term per line"),
            DICTIONARY,
            MIN_ENRICHMENT,
            TOP_N,
            ParamSpec::flag(
                "expand",
                "Expand dictionary entries with embedding neighbors",
            ),
            ParamSpec::optional(
                "embeddings",
                "Embedding file for --expand; trained from the matrix when omitted",
            ),
            ParamSpec::with_default("neighbors", "Neighbors pulled in per seed word", "20"),
            ParamSpec::with_default(
                "embed_dim",
                "Dimension when training fallback embeddings",
                "100",
            ),
            ParamSpec::with_default(
                "embed_window",
                "Co-occurrence window when training fallback embeddings",
                "110",
            ),
            ParamSpec::optional(
                "blocklist",
                "Expansion blocklist file; the bundled stopword+generic list is used when omitted",
            ),
            ParamSpec::flag(
                "study",
                "Run the per-subset stability study instead of labeling one model",
            ),
            ParamSpec::optional(
                "matrix",
                "Matrix file (required for --study or fallback embeddings)",
            ),
            ParamSpec::optional("texts", "Token file (required for --study)"),
            ParamSpec::optional(
                "notes",
                "Corpus notes defining the subsets (required for --study)",
            ),
            SUBSET_BY,
            ParamSpec::with_default("repeats", "Independent fits per subset in a study", "5"),
            K_MIN,
            K_MAX,
            K_STEP,
            WINDOW,
            EPSILON,
            SIMILARITY,
            BATCH_SIZE,
            PASSES,
            KAPPA,
            TAU0,
            MODE,
            SEED,
            THREADS,
            DETERMINISTIC,
            OUT_DIR,
        ],
    },
    CommandSpec {
        name: "proportions",
        about: "Report mean topic proportions per document subset as CSV and a bubble grid",
        params: &[
            ParamSpec::required("model", "Fitted model file"),
            ParamSpec::required("vocab", "Vocabulary file the model was fitted with"),
            ParamSpec::required("matrix", "Sparse document-term matrix file"),
            ParamSpec::required(
                "notes",
                "Corpus notes (.jsonl) aligned with the matrix rows",
            ),
            SUBSET_BY,
            ParamSpec::flag(
                "dominant",
                "Count dominant topics per subset instead of averaging proportions",
            ),
            DICTIONARY,
            MIN_ENRICHMENT,
            TOP_N,
            THREADS,
            DETERMINISTIC,
            OUT_DIR,
        ],
    },
    CommandSpec {
        name: "synth",
        about: "Generate a synthetic corpus with known topics for recovery benchmarks",
        params: &[
            ParamSpec::with_default("k_true", "Number of planted topics", "10"),
            ParamSpec::with_default("vocab_size", "Vocabulary size", "500"),
            ParamSpec::with_default("docs", "Number of documents", "2000"),
            ParamSpec::with_default("tokens", "Tokens per document", "100"),
            ParamSpec::optional("tokens_min", "Smallest document length (with --tokens-max)"),
            ParamSpec::optional("tokens_max", "Largest document length, inclusive"),
            ParamSpec::with_default(
                "alpha_true",
                "Dirichlet parameter for document mixtures",
                "0.1",
            ),
            ParamSpec::with_default(
                "eta_true",
                "Dirichlet parameter for topics under --structure dirichlet",
                "0.1",
            ),
            ParamSpec::with_default("structure", "Topic shape: block or dirichlet", "block"),
            ParamSpec::with_default(
                "p_leak",
                "Probability mass a block topic spreads outside its block",
                "0.05",
            ),
            SEED,
            OUT_DIR,
        ],
    },
    CommandSpec {
        name: "report",
        about: "Re-run the command recorded in a manifest, reproducing its outputs",
        params: &[
            ParamSpec::required("manifest", "Manifest file written by a previous run"),
            ParamSpec::optional("out_dir", "Redirect outputs to a different directory"),
        ],
    },
];

pub fn command(name: &str) -> Option<&'static CommandSpec> {
    COMMANDS.iter().find(|spec| spec.name == name)
}
