//! Command-line entry point.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ctm_core::ectm::{self, TrainStatus};
use ctm_core::embeddings::{fallback_vector, DEFAULT_EMBED_SEED};
use ctm_core::llda::average_references;
use ctm_core::metrics;
use ctm_core::prior::HYPOTHESIS_TEMPLATE;
use ctm_core::rng::stage_seed;
use ctm_core::{
    corpus_divergence, hard_labels, preprocess, project_vocab, proxy_scores, soft_labels, train_llda, Corpus,
    ReferenceTopics,
};
use serde_json::json;

use crate::checkpoint::Checkpoint;
use crate::config::{require_exists, RunConfig};
use crate::error::{Error, Result};
use crate::{demo, formats};

#[derive(Debug, Parser)]
#[command(name = "ctm", version, about = "Coordinated topic modeling")]
pub struct Cli {
    /// TOML run configuration; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize and prune a JSON Lines corpus into a corpus directory.
    Preprocess(PreprocessArgs),
    /// Fit reference topics on a labeled corpus with Labeled LDA.
    TrainReference(TrainReferenceArgs),
    /// Turn surface-name scores into a document-topic prior.
    GenPrior(GenPriorArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Write mean-path topic proportions for a corpus.
    Infer(InferArgs),
    /// Print the top words of every topic.
    TopWords(TopWordsArgs),
    /// Topic coherence, diversity and quality.
    EvalTopics(EvalTopicsArgs),
    /// Score argmax classification against gold labels.
    EvalClassify(EvalClassifyArgs),
    /// Per-topic divergence between two models trained on the same reference.
    Compare(CompareArgs),
    /// Top words of one topic.
    ContextWords(ContextWordsArgs),
    /// Run the full pipeline on a planted synthetic corpus.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// JSON Lines input with `id`, `text` and optional `label`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub max_df: Option<f64>,
    #[arg(long)]
    pub min_count: Option<usize>,
    /// Stopword file, one word per line.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainReferenceArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Comma-separated topic names; defaults to the corpus labels.
    #[arg(long, value_delimiter = ',')]
    pub topics: Option<Vec<String>>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Defaults to half the iterations when `--iters` is given.
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent chains averaged in seed order; run on up to CTM_THREADS threads.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenPriorArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Score file (CSV or JSON).
    #[arg(long, conflicts_with = "proxy")]
    pub scores: Option<PathBuf>,
    /// Use embedding similarity to the surface names instead of a score file.
    #[arg(long)]
    pub proxy: bool,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub embed_seed: Option<u64>,
    /// Threshold labels instead of soft labels.
    #[arg(long)]
    pub hard: bool,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub embed_seed: Option<u64>,
    #[arg(long)]
    pub lambda_beta: Option<f64>,
    #[arg(long)]
    pub lambda_theta: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use `log((theta^T beta + b) / 2)` for the reconstruction.
    #[arg(long)]
    pub normalize_recon: bool,
    /// Feed raw counts to the encoder.
    #[arg(long)]
    pub count_input: bool,
    #[arg(long)]
    pub no_self_training: bool,
    #[arg(long)]
    pub no_background_bias: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// theta CSV; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TopWordsArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(short = 'n', default_value_t = 10)]
    pub n: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalTopicsArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Corpus used for co-occurrence counts; defaults to `--corpus`.
    #[arg(long)]
    pub coherence_corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalClassifyArgs {
    #[arg(long)]
    pub theta: PathBuf,
    /// `doc_id,label` CSV; the first label of each document is used.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub model_a: PathBuf,
    #[arg(long)]
    pub model_b: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write `topic,kl,kl_reverse,kl_mean` rows.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ContextWordsArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Topic name or index.
    #[arg(long)]
    pub topic: String,
    #[arg(short = 'n', default_value_t = 20)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Directory for `model.json` and `report.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error ({}): {e}", e.kind());
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Preprocess(a) => cmd_preprocess(a, &config),
        Command::TrainReference(a) => cmd_train_reference(a, &config),
        Command::GenPrior(a) => cmd_gen_prior(a, &config),
        Command::Train(a) => cmd_train(a, &config),
        Command::Infer(a) => cmd_infer(a, &config),
        Command::TopWords(a) => cmd_top_words(a, &config),
        Command::EvalTopics(a) => cmd_eval_topics(a, &config),
        Command::EvalClassify(a) => cmd_eval_classify(a),
        Command::Compare(a) => cmd_compare(a),
        Command::ContextWords(a) => cmd_context_words(a, &config),
        Command::Demo(a) => demo::run(a.seed, a.out.as_deref()),
    }
}

/// Worker-thread cap from `CTM_THREADS` (default 1).
pub fn threads() -> Result<usize> {
    match std::env::var("CTM_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Invalid(format!("CTM_THREADS must be a positive integer, got '{v}'"))),
        },
    }
}

fn input(flag: Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    let path = flag
        .or_else(|| configured.clone())
        .ok_or_else(|| Error::Invalid(format!("missing {what}: pass the flag or set it under [paths]")))?;
    require_exists(&path)?;
    Ok(path)
}

fn emit(out: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    match out {
        Some(p) => formats::write_json(p, value),
        None => {
            print!("{}", formats::to_json(value));
            Ok(())
        }
    }
}

fn load_corpus(flag: Option<PathBuf>, config: &RunConfig) -> Result<Corpus> {
    formats::read_corpus(&input(flag, &config.paths.corpus, "--corpus")?)
}

fn load_model(flag: Option<PathBuf>, config: &RunConfig) -> Result<Checkpoint> {
    Checkpoint::load(&input(flag, &config.paths.model, "--model")?)
}

fn root_seed(flag: Option<u64>, config: &RunConfig) -> u64 {
    flag.or(config.seed).unwrap_or(0)
}

fn cmd_preprocess(a: PreprocessArgs, config: &RunConfig) -> Result<()> {
    let mut section = config.preprocess.clone();
    if let Some(v) = a.max_df {
        section.max_doc_frequency = v;
    }
    if let Some(v) = a.min_count {
        section.min_word_count = v;
    }
    if a.stopwords.is_some() {
        section.stopwords_file = a.stopwords;
    }
    let rules = section.rules()?;
    let raw = formats::read_jsonl(&a.input)?;
    let corpus = preprocess(&raw, &rules)?;
    formats::write_corpus(&corpus, &a.out)?;
    let summary = json!({
        "documents": corpus.num_docs(),
        "vocab_size": corpus.vocab_size(),
        "empty_documents": corpus.empty_docs().iter().map(|&d| &corpus.doc_ids()[d]).collect::<Vec<_>>(),
        "labels": corpus.label_names(),
        "rules": section,
        "stopword_count": rules.stopwords.len(),
    });
    formats::write_json(&a.out.join("meta.json"), &summary)?;
    eprintln!(
        "{} documents, {} words, {} empty after pruning",
        corpus.num_docs(),
        corpus.vocab_size(),
        corpus.empty_docs().len()
    );
    emit(None, &summary)
}

fn cmd_train_reference(a: TrainReferenceArgs, config: &RunConfig) -> Result<()> {
    let corpus = load_corpus(a.corpus, config)?;
    let names = a.topics.unwrap_or_else(|| corpus.label_names().to_vec());
    let seed = root_seed(a.seed, config);
    let mut llda = config.llda.clone();
    if let Some(n) = a.iters {
        llda.iterations = n;
        llda.burn_in = a.burn_in.unwrap_or(n / 2);
    } else if let Some(b) = a.burn_in {
        llda.burn_in = b;
    }
    llda.seed = stage_seed(seed, "llda");
    llda.validate()?;
    if a.chains == 0 {
        return Err(Error::Invalid("--chains must be positive".into()));
    }

    let chain_configs: Vec<_> = (0..a.chains)
        .map(|c| {
            let mut cfg = llda.clone();
            if c > 0 {
                cfg.seed = stage_seed(llda.seed, &format!("chain-{c}"));
            }
            cfg
        })
        .collect();
    let workers = threads()?.min(a.chains);
    let mut chains: Vec<Option<ctm_core::Result<ReferenceTopics>>> = (0..a.chains).map(|_| None).collect();
    for group in (0..a.chains).collect::<Vec<_>>().chunks(workers) {
        std::thread::scope(|s| {
            let handles: Vec<_> = group
                .iter()
                .map(|&c| {
                    let (corpus, names, cfg) = (&corpus, &names, &chain_configs[c]);
                    (c, s.spawn(move || train_llda(corpus, names, cfg)))
                })
                .collect();
            for (c, h) in handles {
                chains[c] = Some(h.join().expect("LLDA worker panicked"));
            }
        });
    }
    let chains = chains.into_iter().map(|c| c.expect("every chain ran")).collect::<ctm_core::Result<Vec<_>>>()?;
    let reference = if chains.len() == 1 { chains.into_iter().next().expect("one chain") } else { average_references(&chains)? };

    let meta = json!({ "seed": seed, "chains": a.chains, "llda": llda });
    formats::save_reference(&reference, Some(meta), &a.out)?;
    eprintln!(
        "reference: {} topics over {} words -> {}",
        reference.num_topics(),
        reference.vocab().len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_gen_prior(a: GenPriorArgs, config: &RunConfig) -> Result<()> {
    let corpus = load_corpus(a.corpus, config)?;
    let reference = formats::load_reference(&input(a.reference, &config.paths.reference, "--ref")?)?;
    let names = reference.names();
    let embed_seed = a.embed_seed.unwrap_or(DEFAULT_EMBED_SEED);

    let (scores, source) = if a.proxy {
        let table = formats::load_embeddings(&input(a.embeddings, &config.paths.embeddings, "--embeddings")?)?;
        let emb = project_vocab(&table, corpus.vocab(), embed_seed)?;
        let name_vectors: Vec<Vec<f64>> = names
            .iter()
            .map(|n| table.get(n).map(<[f64]>::to_vec).unwrap_or_else(|| fallback_vector(n, table.dim(), embed_seed)))
            .collect();
        (proxy_scores(&corpus, &emb, names, &name_vectors)?, "proxy".to_string())
    } else {
        let path = input(a.scores, &config.paths.scores, "--scores (or --proxy)")?;
        (formats::load_scores(&path, &corpus, names)?, path.display().to_string())
    };

    let hard = a.hard || config.prior.hard;
    let tau = a.tau.unwrap_or(config.prior.tau);
    let prior = if hard { hard_labels(&scores, tau)? } else { soft_labels(&scores)? };
    if !prior.flagged().is_empty() {
        log::warn!("{} documents fell back to a uniform prior", prior.flagged().len());
    }
    let meta = json!({
        "labeling": if hard { "hard" } else { "soft" },
        "tau": if hard { Some(tau) } else { None },
        "scores": source,
        "embed_seed": embed_seed,
        "hypothesis_template": HYPOTHESIS_TEMPLATE,
    });
    formats::save_prior(&prior, Some(meta), &a.out)?;
    eprintln!(
        "prior: {} documents, {} flagged -> {}",
        corpus.num_docs(),
        prior.flagged().len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs, config: &RunConfig) -> Result<()> {
    let corpus = load_corpus(a.corpus, config)?;
    let reference = formats::load_reference(&input(a.reference, &config.paths.reference, "--ref")?)?;
    let prior = formats::load_prior(&input(a.prior, &config.paths.prior, "--prior")?, &corpus)?;
    let table = formats::load_embeddings(&input(a.embeddings, &config.paths.embeddings, "--embeddings")?)?;
    let seed = root_seed(a.seed, config);
    let embed_seed = a.embed_seed.unwrap_or(DEFAULT_EMBED_SEED);

    let mut cfg = config.ectm.clone();
    cfg.num_topics = reference.num_topics();
    cfg.embed_dim = table.dim();
    cfg.seed = stage_seed(seed, "ectm");
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = a.$field { cfg.$field = v; })* };
    }
    set!(lambda_beta, lambda_theta, lr, epochs, batch_size, hidden);
    cfg.normalize_recon |= a.normalize_recon;
    if a.count_input {
        cfg.encoder_input = ectm::EncoderInput::Counts;
    }
    cfg.self_training &= !a.no_self_training;
    cfg.background_bias &= !a.no_background_bias;

    let rho = project_vocab(&table, corpus.vocab(), embed_seed)?;
    let rho_tilde = project_vocab(&table, reference.vocab(), embed_seed)?;
    let model = ectm::model::init_model(&cfg, rho.matrix, rho_tilde.matrix, &corpus)?;
    let outcome = ectm::train::train_with_progress(model, &corpus, &reference, prior, |epoch, l| {
        log::info!(
            "epoch {epoch}: total {:.4} recon {:.4} kl {:.4} r_beta {:.5} r_theta {:.5}",
            l.total,
            l.neg_recon,
            l.kl_gauss,
            l.r_beta,
            l.r_theta
        );
    })?;
    Checkpoint::new(&outcome, &corpus, &reference, seed, embed_seed).save(&a.out)?;
    match outcome.status {
        TrainStatus::Completed => {
            let last = outcome.history.last().copied().unwrap_or_default();
            eprintln!("trained {} steps, final loss {:.4} -> {}", outcome.steps, last.total, a.out.display());
            Ok(())
        }
        TrainStatus::Diverged { step } => Err(ctm_core::Error::Numerical(format!(
            "training diverged at step {step}; last finite parameters saved to {}",
            a.out.display()
        ))
        .into()),
    }
}

fn cmd_infer(a: InferArgs, config: &RunConfig) -> Result<()> {
    let ck = load_model(a.model, config)?;
    let corpus = load_corpus(a.corpus, config)?;
    ck.check_corpus(&corpus)?;
    let theta = ectm::infer_theta(&ck.model, &corpus)?;
    match a.out {
        Some(p) => formats::write_table(&p, corpus.doc_ids(), &ck.reference_names, &theta),
        None => {
            print!("{}", formats::format_table(corpus.doc_ids(), &ck.reference_names, &theta));
            Ok(())
        }
    }
}

fn named_lists(names: &[String], lists: Vec<Vec<String>>) -> serde_json::Value {
    serde_json::Value::Object(names.iter().cloned().zip(lists.into_iter().map(|l| json!(l))).collect())
}

fn cmd_top_words(a: TopWordsArgs, config: &RunConfig) -> Result<()> {
    let ck = load_model(a.model, config)?;
    let beta = ectm::topic_matrices(&ck.model).beta;
    let lists = ectm::top_words(&beta, &ck.vocab, a.n)?;
    emit(a.out.as_deref(), &named_lists(&ck.reference_names, lists))
}

fn cmd_eval_topics(a: EvalTopicsArgs, config: &RunConfig) -> Result<()> {
    let ck = load_model(a.model, config)?;
    let corpus = load_corpus(a.corpus, config)?;
    ck.check_corpus(&corpus)?;
    let coherence_corpus = match a.coherence_corpus.or_else(|| config.eval.coherence_corpus.clone()) {
        Some(p) => formats::read_corpus(&p)?,
        None => corpus,
    };
    let beta = ectm::topic_matrices(&ck.model).beta;
    let report = metrics::topic_quality_report(
        &beta,
        &ck.vocab,
        &coherence_corpus,
        config.eval.coherence_top_n,
        config.eval.diversity_top_n,
    )?;
    eprintln!("TC {:.4}  TD {:.4}  TQ {:.4}", report.tc, report.td, report.tq);
    let per_topic: serde_json::Map<_, _> =
        ck.reference_names.iter().cloned().zip(report.per_topic_tc.iter().map(|&v| json!(v))).collect();
    emit(
        a.out.as_deref(),
        &json!({ "tc": report.tc, "td": report.td, "tq": report.tq, "per_topic_tc": per_topic }),
    )
}

fn cmd_eval_classify(a: EvalClassifyArgs) -> Result<()> {
    let (rows, names) = formats::read_table(&a.theta)?;
    let mut gold_by_id = std::collections::BTreeMap::new();
    for (id, label) in formats::read_labels(&a.gold)? {
        gold_by_id.entry(id).or_insert(label);
    }
    let theta = ctm_core::Matrix::from_rows(&rows.iter().map(|(_, r)| r.as_slice()).collect::<Vec<_>>())
        .ok_or_else(|| Error::parse(&a.theta, None, "rows differ in length"))?;
    let mut gold = Vec::with_capacity(rows.len());
    for (id, _) in &rows {
        let label = gold_by_id
            .get(id)
            .ok_or_else(|| Error::Invalid(format!("no gold label for document '{id}'")))?;
        let k = names
            .iter()
            .position(|n| n == label)
            .ok_or_else(|| Error::Invalid(format!("gold label '{label}' is not a topic of the theta table")))?;
        gold.push(k);
    }
    let pred = metrics::classify(&theta);
    let report = metrics::classification_report(&pred, &gold, names.len())?;
    eprintln!(
        "accuracy {:.4}  macro-F1 {:.4}  micro-F1 {:.4}",
        report.accuracy, report.macro_f1, report.micro_f1
    );
    emit(a.out.as_deref(), &json!(report))
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let ma = Checkpoint::load(&a.model_a)?.projected();
    let mb = Checkpoint::load(&a.model_b)?.projected();
    let ab = corpus_divergence(&ma, &mb)?;
    let ba = corpus_divergence(&mb, &ma)?;
    let mean: Vec<f64> = ab.per_topic_kl.iter().zip(&ba.per_topic_kl).map(|(x, y)| 0.5 * (x + y)).collect();
    let ranking_mean: Vec<&String> =
        ctm_core::linalg::argsort_desc(&mean).into_iter().map(|j| &ab.names[j]).collect();
    if let Some(p) = &a.csv {
        let mut out = String::from("topic,kl,kl_reverse,kl_mean\n");
        for (j, name) in ab.names.iter().enumerate() {
            out.push_str(&format!("{name},{},{},{}\n", ab.per_topic_kl[j], ba.per_topic_kl[j], mean[j]));
        }
        formats::write_text(p, &out)?;
    }
    if let Some(top) = ab.ranking.first() {
        eprintln!("largest divergence: {top}");
    }
    emit(
        a.out.as_deref(),
        &json!({
            "names": ab.names,
            "per_topic_kl": ab.per_topic_kl,
            "ranking": ab.ranking,
            "per_topic_kl_reverse": ba.per_topic_kl,
            "per_topic_kl_mean": mean,
            "ranking_mean": ranking_mean,
        }),
    )
}

fn cmd_context_words(a: ContextWordsArgs, config: &RunConfig) -> Result<()> {
    let ck = load_model(a.model, config)?;
    let topic = ck.topic_index(&a.topic)?;
    let beta = ectm::topic_matrices(&ck.model).beta;
    let words = ctm_core::context_words(&beta, &ck.vocab, topic, a.n)?;
    emit(None, &json!({ "topic": ck.reference_names[topic], "words": words }))
}
