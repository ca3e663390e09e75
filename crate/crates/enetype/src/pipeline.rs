//! The three training and prediction stages: multilingual training,
//! per-language fine-tuning, and thresholded prediction.

use std::collections::BTreeMap;

use enetype_core::loss::{compute_weights, count_labels};
use enetype_core::rng;
use enetype_core::tokenizer::fnv1a64;
use enetype_core::train::{train, TrainReport};
use enetype_core::{
    assign, AdamConfig, AdamState, Checkpoint, DocVector, EncoderParams, Error as CoreError, Example, Executor,
    Feedback, HeadArch, HeadParams, Input, LossWeights, Model, PageKey, PredictionSet, Taxonomy, TokenSequence,
    Tokenizer, TrainConfig,
};
use rand::seq::SliceRandom;

use crate::corpus::{ContentRule, Corpus, GoldLabels, Page, ReadMode};
use crate::error::{Error, Result};
use crate::store::CheckpointMeta;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Maximum framed sequence length, BEGIN and END included.
    pub max_len: usize,
    pub epochs: usize,
    pub finetune_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub threshold: f64,
    /// Restrict training to these languages.
    pub languages: Option<Vec<String>>,
    /// Frequency-weighted loss; unit weights when off.
    pub weighting: bool,
    pub arch: HeadArch,
    pub feedback: Feedback,
    pub content: ContentRule,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Fraction of each language's labeled pages held out for early stopping and scoring.
    pub holdout_fraction: f64,
    pub patience: Option<usize>,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_len: 512,
            epochs: 100,
            finetune_epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            threshold: 0.5,
            languages: None,
            weighting: true,
            arch: HeadArch::Hierarchical,
            feedback: Feedback::Logits,
            content: ContentRule::Text,
            vocab_size: enetype_core::encoder::DEFAULT_VOCAB_SIZE,
            embed_dim: enetype_core::encoder::DEFAULT_EMBED_DIM,
            hidden_dim: enetype_core::encoder::DEFAULT_HIDDEN_DIM,
            holdout_fraction: 0.1,
            patience: Some(10),
            workers: 1,
        }
    }
}

impl PipelineConfig {
    /// Learning rate and batch size tuned for a pretrained transformer encoder
    /// feeding the head through imported vectors.
    pub fn transformer_preset() -> Self {
        PipelineConfig { learning_rate: 2e-5, batch_size: 45, ..Default::default() }
    }

    /// Small encoder and larger held-out share for the built-in synthetic corpus.
    pub fn synthetic(seed: u64) -> Self {
        PipelineConfig {
            seed,
            vocab_size: 1 << 12,
            embed_dim: 16,
            hidden_dim: 32,
            learning_rate: 1e-2,
            max_len: 128,
            holdout_fraction: 0.2,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Core(CoreError::InvalidConfig(m)));
        if self.max_len < 3 {
            return bad(format!("max_len must be at least 3, got {}", self.max_len));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return bad(format!("holdout_fraction must lie in [0, 1), got {}", self.holdout_fraction));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        Ok(())
    }

    pub fn train_config(&self, epochs: usize, shuffle_stream: u64) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
            seed: self.seed,
            threshold: self.threshold,
            patience: self.patience,
            shuffle_stream,
        }
    }

    fn wants(&self, lang: &str) -> bool {
        self.languages.as_ref().is_none_or(|l| l.iter().any(|x| x == lang))
    }
}

/// How pages become model inputs.
#[derive(Debug, Clone)]
pub enum Features {
    /// Built-in tokenizer and encoder.
    Text { tokenizer: Tokenizer, max_len: usize, content: ContentRule },
    /// Vectors imported from an external encoder.
    Vectors(BTreeMap<PageKey, DocVector>),
}

impl Features {
    pub fn text(config: &PipelineConfig) -> Result<Self> {
        Ok(Features::Text {
            tokenizer: Tokenizer::new(config.vocab_size)?,
            max_len: config.max_len,
            content: config.content,
        })
    }

    pub fn input(&self, page: &Page) -> Result<Input> {
        match self {
            Features::Text { tokenizer, max_len, content } => {
                let text = page.content(*content);
                if text.trim().is_empty() {
                    return Err(Error::Data(format!("page {}:{} has no content", page.language, page.page_id)));
                }
                Ok(Input::Tokens(tokenizer.tokenize(&text, *max_len)?))
            }
            Features::Vectors(map) => map
                .get(&page.key())
                .cloned()
                .map(Input::Vector)
                .ok_or_else(|| Error::Data(format!("no vector for page {}:{}", page.language, page.page_id))),
        }
    }

    fn vector_dim(&self) -> Option<usize> {
        match self {
            Features::Text { .. } => None,
            Features::Vectors(map) => map.values().next().map(DocVector::dim),
        }
    }
}

/// Labeled examples split per language into training and held-out parts.
#[derive(Debug, Clone, Default)]
pub struct Split {
    pub train: Vec<(PageKey, Example)>,
    pub holdout: Vec<(PageKey, Example)>,
    /// Gold entries whose page is missing from the dump.
    pub missing_pages: usize,
}

impl Split {
    fn examples(part: &[(PageKey, Example)]) -> Vec<Example> {
        part.iter().map(|(_, e)| e.clone()).collect()
    }

    pub fn holdout_keys(&self) -> impl Iterator<Item = &PageKey> {
        self.holdout.iter().map(|(k, _)| k)
    }
}

fn language_split_rng(seed: u64, lang: &str) -> impl rand::Rng {
    rng::stream(seed ^ fnv1a64(lang.as_bytes()), rng::STREAM_SPLIT)
}

/// Builds examples for every labeled page of the selected languages. The
/// held-out part of a language depends only on the seed and that language's
/// labeled pages, so stage 1 and stage 2 see the same split.
pub fn labeled_split(
    corpus: &Corpus,
    gold: &GoldLabels,
    taxonomy: &Taxonomy,
    features: &Features,
    config: &PipelineConfig,
    only: Option<&str>,
) -> Result<Split> {
    let mut split = Split::default();
    for (lang, pages) in corpus {
        if !config.wants(lang) || only.is_some_and(|o| o != lang) {
            continue;
        }
        let mut labeled: BTreeMap<PageKey, &Page> = BTreeMap::new();
        for page in pages {
            if gold.get(&page.key()).is_some() {
                labeled.insert(page.key(), page);
            }
        }
        let missing = gold.labels.keys().filter(|k| &k.0 == lang && !labeled.contains_key(*k)).count();
        if missing > 0 {
            log::warn!("{lang}: {missing} gold entries refer to pages absent from the dump; dropped");
        }
        split.missing_pages += missing;

        let mut examples = Vec::with_capacity(labeled.len());
        for (key, page) in labeled {
            let ids = gold.get(&key).expect("labeled page has gold");
            let targets = taxonomy.encode_targets(ids.iter().map(String::as_str))?;
            examples.push((key, Example { input: features.input(page)?, targets }));
        }
        let n = examples.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut language_split_rng(config.seed, lang));
        let held = ((config.holdout_fraction * n as f64).round() as usize).min(n.saturating_sub(1));
        let mut slots: Vec<Option<(PageKey, Example)>> = examples.into_iter().map(Some).collect();
        for (rank, &i) in order.iter().enumerate() {
            let item = slots[i].take().expect("each index once");
            if rank < held {
                split.holdout.push(item);
            } else {
                split.train.push(item);
            }
        }
    }
    Ok(split)
}

fn loss_weights(config: &PipelineConfig, dims: [usize; 3], train: &[(PageKey, Example)]) -> Result<LossWeights> {
    if !config.weighting {
        return Ok(LossWeights::uniform(dims));
    }
    let counts = count_labels(dims, train.iter().map(|(_, e)| &e.targets));
    Ok(compute_weights([&counts[0], &counts[1], &counts[2]])?)
}

/// Result of a training stage.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub checkpoint: Checkpoint,
    pub report: TrainReport,
    pub split: Split,
    pub weights: LossWeights,
}

fn content_name(rule: ContentRule) -> &'static str {
    match rule {
        ContentRule::Text => "text",
        ContentRule::OpeningAndText => "opening+text",
    }
}

fn metadata(stage: &str, languages: Vec<String>, config: &PipelineConfig, report: &TrainReport) -> String {
    CheckpointMeta {
        stage: stage.into(),
        languages,
        seed: config.seed,
        max_len: config.max_len,
        threshold: config.threshold,
        content: content_name(config.content).into(),
        epochs_run: report.epochs.len(),
    }
    .to_json()
}

/// A freshly initialised model for `taxonomy`.
pub fn init_model(taxonomy: &Taxonomy, features: &Features, config: &PipelineConfig) -> Result<Model> {
    let mut rng = rng::stream(config.seed, rng::STREAM_INIT);
    let (encoder, hidden) = match features.vector_dim() {
        Some(dim) => (None, dim),
        None if matches!(features, Features::Vectors(_)) => {
            return Err(Error::Data("no document vectors supplied".into()));
        }
        None => (
            Some(EncoderParams::init(config.vocab_size, config.embed_dim, config.hidden_dim, &mut rng)?),
            config.hidden_dim,
        ),
    };
    let head = HeadParams::init(config.arch, config.feedback, hidden, taxonomy.head_dims(), &mut rng);
    Ok(Model::new(encoder, head)?)
}

/// Stage 1: one model over the shuffled union of all languages.
pub fn train_multilingual<E: Executor>(
    corpus: &Corpus,
    gold: &GoldLabels,
    taxonomy: &Taxonomy,
    features: &Features,
    config: &PipelineConfig,
    exec: &E,
) -> Result<StageOutcome> {
    config.validate()?;
    let split = labeled_split(corpus, gold, taxonomy, features, config, None)?;
    if split.train.is_empty() {
        return Err(CoreError::EmptyTrainingSet.into());
    }
    let mut model = init_model(taxonomy, features, config)?;
    let weights = loss_weights(config, taxonomy.head_dims(), &split.train)?;
    let train_cfg = config.train_config(config.epochs, rng::STREAM_SHUFFLE);
    let mut optimizer = AdamState::new(train_cfg.adam, &model.tensor_lens());
    let report = train(
        &mut model,
        &mut optimizer,
        &Split::examples(&split.train),
        &Split::examples(&split.holdout),
        &weights,
        &train_cfg,
        exec,
    )?;
    let languages: Vec<String> = corpus.keys().filter(|l| config.wants(l)).cloned().collect();
    let checkpoint = Checkpoint {
        taxonomy_hash: taxonomy.content_hash(),
        model,
        optimizer: Some(optimizer),
        metadata: metadata("multilingual", languages, config, &report),
    };
    Ok(StageOutcome { checkpoint, report, split, weights })
}

/// Stage 2: continue from `base` on one language with a fresh optimizer.
#[allow(clippy::too_many_arguments)]
pub fn finetune<E: Executor>(
    base: &Checkpoint,
    corpus: &Corpus,
    gold: &GoldLabels,
    taxonomy: &Taxonomy,
    features: &Features,
    language: &str,
    config: &PipelineConfig,
    exec: &E,
) -> Result<StageOutcome> {
    config.validate()?;
    base.check_taxonomy(taxonomy.content_hash())?;
    let split = labeled_split(corpus, gold, taxonomy, features, config, Some(language))?;
    if split.train.is_empty() {
        return Err(Error::Data(format!("no labeled pages for language {language}")));
    }
    let mut model = base.model.clone();
    let weights = loss_weights(config, taxonomy.head_dims(), &split.train)?;
    let train_cfg = config.train_config(config.finetune_epochs, rng::STREAM_FINETUNE);
    let mut optimizer = AdamState::new(train_cfg.adam, &model.tensor_lens());
    let report = train(
        &mut model,
        &mut optimizer,
        &Split::examples(&split.train),
        &Split::examples(&split.holdout),
        &weights,
        &train_cfg,
        exec,
    )?;
    let checkpoint = Checkpoint {
        taxonomy_hash: taxonomy.content_hash(),
        model,
        optimizer: Some(optimizer),
        metadata: metadata("finetune", vec![language.to_string()], config, &report),
    };
    Ok(StageOutcome { checkpoint, report, split, weights })
}

/// Thresholded labelling of pages with one model.
pub struct Predictor<'a> {
    pub model: &'a Model,
    pub taxonomy: &'a Taxonomy,
    pub features: &'a Features,
    pub threshold: f64,
}

impl<'a> Predictor<'a> {
    pub fn new(model: &'a Model, taxonomy: &'a Taxonomy, features: &'a Features, threshold: f64) -> Result<Self> {
        let outputs = taxonomy.head_dims()[2];
        if model.head.dims()[2] != outputs {
            return Err(Error::Data(format!(
                "model predicts {} labels but the taxonomy has {outputs} assignable labels",
                model.head.dims()[2]
            )));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(CoreError::InvalidConfig(format!("threshold must lie in (0, 1), got {threshold}")).into());
        }
        Ok(Predictor { model, taxonomy, features, threshold })
    }

    pub fn predict_input(&self, language: &str, page_id: &str, input: &Input) -> Result<PredictionSet> {
        let logits = self.model.forward(input)?;
        let a = assign(logits.fine(), self.threshold);
        Ok(PredictionSet::from_assignment(language, page_id, &a, self.taxonomy))
    }

    pub fn predict(&self, page: &Page) -> Result<PredictionSet> {
        let input = self.features.input(page)?;
        self.predict_input(&page.language, &page.page_id, &input)
    }

    /// Order-preserving batch prediction. In skip mode failing pages are
    /// dropped and counted; in strict mode the first failure is returned.
    pub fn predict_batch<E: Executor>(&self, pages: &[Page], exec: &E, mode: ReadMode) -> Result<(Vec<PredictionSet>, usize)> {
        let results = exec.map(pages, |p| self.predict(p));
        let mut out = Vec::with_capacity(pages.len());
        let mut skipped = 0;
        for (page, r) in pages.iter().zip(results) {
            match (r, mode) {
                (Ok(p), _) => out.push(p),
                (Err(e), ReadMode::Skip) => {
                    skipped += 1;
                    log::warn!("page {}:{} skipped: {e}", page.language, page.page_id);
                }
                (Err(e), ReadMode::Strict) => {
                    return Err(Error::Data(format!("page {}:{}: {e}", page.language, page.page_id)));
                }
            }
        }
        Ok((out, skipped))
    }
}

/// Sequence length recorded in a checkpoint, if any.
pub fn checkpoint_max_len(ckpt: &Checkpoint) -> Option<usize> {
    CheckpointMeta::parse(&ckpt.metadata).map(|m| m.max_len).filter(|&l| l >= 3)
}

/// Frames a pre-split unit sequence exactly as the tokenizer would.
pub fn frame_units(units: Vec<u32>, max_len: usize) -> Result<TokenSequence> {
    Ok(TokenSequence::frame(units, max_len)?)
}
