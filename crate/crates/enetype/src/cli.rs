//! Command-line entry point.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use enetype_core::gradcheck::random_check;
use enetype_core::{apply_voting, label_histogram, micro_f1, Metrics, PageKey, PredictionSet};

use crate::ablation::{run_ablation, Dataset, VoteSettings};
use crate::config::{FormatArg, Settings};
use crate::corpus::{self, linked_pages, load_corpus, load_links, read_pages, GoldLabels, StatsRow};
use crate::error::{Error, Result};
use crate::parallel::Threaded;
use crate::pipeline::{checkpoint_max_len, finetune, train_multilingual, Features, PipelineConfig, Predictor};
use crate::records::{read_predictions, write_predictions};
use crate::store::{load_checkpoint_for, load_taxonomy, save_checkpoint};
use crate::synthetic::{generate, SyntheticSpec};
use crate::vectors::{index_vectors, read_sidecar, VectorTable};
use crate::{report, store};

/// Upper bound on the gradient check's relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "enetype", about = "Hierarchical entity-type classification of encyclopedia pages", version = version_string())]
pub struct Cli {
    /// JSON object with default settings; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Page and linked-page counts per language.
    Stats,
    /// Most frequent labels in gold labels or predictions.
    Histogram,
    /// Train one model on all languages.
    Train,
    /// Continue training a checkpoint on one language.
    Finetune,
    /// Label pages with a checkpoint.
    Predict,
    /// Unify predictions of linked pages by mean-frequency voting.
    Vote,
    /// Micro-averaged precision, recall and F1 against gold labels.
    Eval,
    /// Flat / +hierarchy / +weighting / +voting comparison.
    Ablate,
    /// Compare analytic and finite-difference gradients on a random model.
    Gradcheck,
}

const fn version_string() -> &'static str {
    concat!(env!("CARGO_PKG_VERSION"), " (checkpoint format 1)")
}

/// Writes to `--output` or standard output.
fn sink(settings: &Settings) -> Result<Box<dyn Write>> {
    Ok(match &settings.output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            Box::new(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
        }
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn emit(settings: &Settings, body: &str) -> Result<()> {
    let target = settings.output.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let mut out = sink(settings)?;
    out.write_all(body.as_bytes()).and_then(|_| out.flush()).map_err(|e| Error::io(target, e))
}

fn output_path(settings: &Settings) -> Result<PathBuf> {
    settings.output.clone().ok_or_else(|| Error::Usage("--output is required".into()))
}

fn load_gold(path: &Path) -> Result<GoldLabels> {
    GoldLabels::load(corpus::open(path)?, &path.display().to_string())
}

fn load_link_groups(path: &Path) -> Result<Vec<enetype_core::LinkGroup>> {
    load_links(corpus::open(path)?, &path.display().to_string())
}

/// Text features sized for `vocab_size`, or imported vectors when given.
fn features(settings: &Settings, config: &PipelineConfig, vocab_size: Option<usize>) -> Result<Features> {
    match (&settings.vectors, &settings.vector_ids) {
        (Some(_), Some(_)) => {
            let vpath = settings.require("vectors", &settings.vectors)?;
            let ipath = settings.require("vector-ids", &settings.vector_ids)?;
            let table = VectorTable::read(std::io::BufReader::new(File::open(&vpath).map_err(|e| Error::io(&vpath, e))?), &vpath.display().to_string())?;
            let ids = read_sidecar(corpus::open(&ipath)?, &ipath.display().to_string())?;
            Ok(Features::Vectors(index_vectors(table, ids)?))
        }
        (None, None) => {
            let mut c = config.clone();
            if let Some(v) = vocab_size {
                c.vocab_size = v;
            }
            Features::text(&c)
        }
        _ => Err(Error::Usage("--vectors and --vector-ids go together".into())),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let settings = match &cli.config {
        Some(path) => {
            if !path.exists() {
                return Err(Error::Data(format!("{}: no such file or directory", path.display())));
            }
            cli.settings.clone().merged_with(Settings::from_file(path)?)
        }
        None => cli.settings.clone(),
    };
    match cli.command {
        Command::Stats => stats(&settings),
        Command::Histogram => histogram(&settings),
        Command::Train => train(&settings),
        Command::Finetune => finetune_cmd(&settings),
        Command::Predict => predict(&settings),
        Command::Vote => vote(&settings),
        Command::Eval => eval(&settings),
        Command::Ablate => ablate(&settings),
        Command::Gradcheck => gradcheck(&settings),
    }
}

fn stats(settings: &Settings) -> Result<()> {
    let dir = settings.require("pages", &settings.pages)?;
    let linked = match &settings.links {
        Some(_) => linked_pages(&load_link_groups(&settings.require("links", &settings.links)?)?),
        None => BTreeSet::new(),
    };
    let langs = match &settings.languages {
        Some(l) => l.clone(),
        None => corpus::languages_in_dir(&dir)?,
    };
    let mut rows = Vec::new();
    for lang in langs {
        let path = dir.join(format!("{lang}.jsonl"));
        let mut row = StatsRow { language: lang.clone(), pages: 0, linked: 0 };
        for page in read_pages(corpus::open(&path)?, &lang, &path.display().to_string(), settings.read_mode()) {
            let page = page?;
            row.pages += 1;
            row.linked += u64::from(linked.contains(&page.key()));
        }
        rows.push(row);
    }
    let body = match settings.format() {
        FormatArg::Text => report::stats_text(&rows),
        FormatArg::Tsv => report::stats_tsv(&rows),
    };
    emit(settings, &body)
}

fn histogram(settings: &Settings) -> Result<()> {
    let sets: Vec<BTreeSet<String>> = match (&settings.labels, &settings.pred) {
        (Some(_), None) => load_gold(&settings.require("labels", &settings.labels)?)?.labels.into_values().collect(),
        (None, Some(_)) => {
            let path = settings.require("pred", &settings.pred)?;
            read_predictions(corpus::open(&path)?, &path.display().to_string())?.into_values().map(|p| p.labels).collect()
        }
        _ => return Err(Error::Usage("histogram needs exactly one of --labels or --pred".into())),
    };
    let entries = label_histogram(sets.iter(), settings.top);
    let body = match settings.format() {
        FormatArg::Text => report::histogram_text(&entries),
        FormatArg::Tsv => report::histogram_tsv(&entries),
    };
    emit(settings, &body)
}

fn training_inputs(settings: &Settings) -> Result<(enetype_core::Taxonomy, corpus::Corpus, GoldLabels)> {
    let taxonomy = load_taxonomy(&settings.require("taxonomy", &settings.taxonomy)?)?;
    let dir = settings.require("pages", &settings.pages)?;
    let gold = load_gold(&settings.require("labels", &settings.labels)?)?;
    let corpus = load_corpus(&dir, settings.languages.as_deref(), settings.read_mode())?;
    Ok((taxonomy, corpus, gold))
}

fn log_report(stage: &str, report: &enetype_core::train::TrainReport) {
    for e in &report.epochs {
        log::debug!(
            "{stage} epoch {}: train loss {:.6}, held-out loss {:?}, held-out F1 {:?}",
            e.epoch,
            e.train_loss,
            e.holdout_loss,
            e.holdout_f1
        );
    }
    log::info!("{stage}: {} epochs, {} steps, best epoch {:?}", report.epochs.len(), report.steps, report.best_epoch);
}

fn train(settings: &Settings) -> Result<()> {
    let out = output_path(settings)?;
    let config = settings.pipeline();
    config.validate()?;
    let (taxonomy, corpus, gold) = training_inputs(settings)?;
    let features = features(settings, &config, None)?;
    let exec = Threaded::new(config.workers);
    let outcome = train_multilingual(&corpus, &gold, &taxonomy, &features, &config, &exec)?;
    log_report("multilingual", &outcome.report);
    save_checkpoint(&out, &outcome.checkpoint)
}

fn finetune_cmd(settings: &Settings) -> Result<()> {
    let out = output_path(settings)?;
    let language = settings.language.clone().ok_or_else(|| Error::Usage("--language is required".into()))?;
    let config = settings.pipeline();
    config.validate()?;
    let (taxonomy, corpus, gold) = training_inputs(settings)?;
    let base = load_checkpoint_for(&settings.require("checkpoint", &settings.checkpoint)?, &taxonomy)?;
    let vocab = base.model.encoder.as_ref().map(|e| e.vocab_size);
    let features = features(settings, &config, vocab)?;
    let exec = Threaded::new(config.workers);
    let outcome = finetune(&base, &corpus, &gold, &taxonomy, &features, &language, &config, &exec)?;
    log_report(&format!("finetune {language}"), &outcome.report);
    save_checkpoint(&out, &outcome.checkpoint)
}

fn predict(settings: &Settings) -> Result<()> {
    let taxonomy = load_taxonomy(&settings.require("taxonomy", &settings.taxonomy)?)?;
    let ckpt = load_checkpoint_for(&settings.require("checkpoint", &settings.checkpoint)?, &taxonomy)?;
    let dir = settings.require("pages", &settings.pages)?;
    let corpus = load_corpus(&dir, settings.languages.as_deref(), settings.read_mode())?;
    let mut config = settings.pipeline();
    if settings.max_len.is_none() {
        config.max_len = checkpoint_max_len(&ckpt).unwrap_or(config.max_len);
    }
    if settings.threshold.is_none() {
        if let Some(meta) = store::CheckpointMeta::parse(&ckpt.metadata) {
            config.threshold = meta.threshold;
        }
    }
    config.validate()?;
    let features = features(settings, &config, ckpt.model.encoder.as_ref().map(|e| e.vocab_size))?;
    let predictor = Predictor::new(&ckpt.model, &taxonomy, &features, config.threshold)?;
    let exec = Threaded::new(config.workers);
    let mut all = Vec::new();
    for pages in corpus.values() {
        let (preds, skipped) = predictor.predict_batch(pages, &exec, settings.read_mode())?;
        if skipped > 0 {
            log::warn!("{skipped} pages skipped");
        }
        all.extend(preds);
    }
    let target = settings.output.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    write_predictions(sink(settings)?, &all, false).map_err(|e| Error::io(target, e))
}

fn vote(settings: &Settings) -> Result<()> {
    let groups = load_link_groups(&settings.require("links", &settings.links)?)?;
    let path = settings.require("pred", &settings.pred)?;
    let mut predictions = read_predictions(corpus::open(&path)?, &path.display().to_string())?;
    let summary = apply_voting(&groups, &mut predictions, settings.vote_mode(), settings.vote_rule())?;
    log::info!(
        "voted {} groups, revised {} pages, {} linked pages without predictions",
        summary.groups_voted,
        summary.pages_revised,
        summary.missing_members
    );
    let target = settings.output.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    write_predictions(sink(settings)?, predictions.values(), true).map_err(|e| Error::io(target, e))
}

/// Per-language scores; only languages present in the gold labels appear.
pub fn score_by_language(
    predictions: &BTreeMap<PageKey, PredictionSet>,
    gold: &GoldLabels,
    extra: enetype_core::ExtraPages,
    languages: Option<&[String]>,
) -> BTreeMap<String, Metrics> {
    let langs: BTreeSet<&String> = gold.labels.keys().map(|k| &k.0).collect();
    let mut out = BTreeMap::new();
    for lang in langs {
        if languages.is_some_and(|l| !l.contains(lang)) {
            continue;
        }
        let pred = predictions.iter().filter(|(k, _)| &k.0 == lang).map(|(k, p)| (k.clone(), p.labels.clone())).collect();
        out.insert(lang.clone(), micro_f1(&pred, &gold.for_language(lang).labels, extra));
    }
    out
}

fn eval(settings: &Settings) -> Result<()> {
    let gold = load_gold(&settings.require("labels", &settings.labels)?)?;
    let path = settings.require("pred", &settings.pred)?;
    let predictions = read_predictions(corpus::open(&path)?, &path.display().to_string())?;
    let per_language = score_by_language(&predictions, &gold, settings.extra_pages(), settings.languages.as_deref());
    let body = match settings.format() {
        FormatArg::Text => report::metrics_text(&per_language),
        FormatArg::Tsv => report::metrics_tsv("eval", &per_language),
    };
    emit(settings, &body)
}

fn ablate(settings: &Settings) -> Result<()> {
    let synthetic = settings.synthetic.unwrap_or(false);
    let config = if synthetic {
        settings.pipeline_over(PipelineConfig::synthetic(settings.seed.unwrap_or(0)))
    } else {
        settings.pipeline()
    };
    let (taxonomy, corpus, gold, links) = if synthetic {
        let s = generate(&SyntheticSpec::fixture(config.seed))?;
        (s.taxonomy, s.corpus, s.gold, s.links)
    } else {
        let (taxonomy, corpus, gold) = training_inputs(settings)?;
        let links = load_link_groups(&settings.require("links", &settings.links)?)?;
        (taxonomy, corpus, gold, links)
    };
    config.validate()?;
    let features = features(settings, &config, None)?;
    let data = Dataset { taxonomy: &taxonomy, corpus: &corpus, gold: &gold, links: &links };
    let vote = VoteSettings { mode: settings.vote_mode(), rule: settings.vote_rule() };
    let report = run_ablation(&data, &features, &config, vote, &Threaded::new(config.workers));
    let body = match settings.format() {
        FormatArg::Text => report.to_text(),
        FormatArg::Tsv => report.to_tsv(),
    };
    emit(settings, &body)?;
    if let Some(row) = report.rows.iter().find(|r| r.error.is_some()) {
        return Err(Error::Data(format!("ablation row {} failed", row.config)));
    }
    Ok(())
}

fn gradcheck(settings: &Settings) -> Result<()> {
    let seed = settings.seed.unwrap_or(0);
    let r = random_check(seed)?;
    emit(settings, &format!("seed {seed}: max relative error {:.3e} over {} entries\n", r.max_relative_error, r.entries))?;
    if r.max_relative_error < GRADCHECK_TOLERANCE {
        Ok(())
    } else {
        Err(Error::Numeric(format!("gradient check failed: {:.3e} >= {GRADCHECK_TOLERANCE:e}", r.max_relative_error)))
    }
}

/// Parses `args` and runs; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
