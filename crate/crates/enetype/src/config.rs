//! Run settings shared by command-line flags and JSON config files.
//! Precedence: command line, then config file, then built-in defaults.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use enetype_core::{ExtraPages, Feedback, HeadArch, VoteMode, VoteRule};
use serde::Deserialize;

use crate::corpus::{ContentRule, ReadMode};
use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchArg {
    Hierarchical,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackArg {
    Logits,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContentArg {
    Text,
    OpeningText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VoteArg {
    Overwrite,
    Advisory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreExtraArg {
    Ignore,
    Fp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetArg {
    /// Hashed-subword reference encoder defaults.
    Reference,
    /// Learning rate 2e-5 and batch size 45.
    Transformer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    Text,
    Tsv,
}

/// Every tunable of a run. All fields are optional so that command line
/// and config file can be merged field by field.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Taxonomy definition (`id<TAB>assignable<TAB>name`).
    #[arg(long, global = true)]
    pub taxonomy: Option<PathBuf>,
    /// Directory of `<lang>.jsonl` page dumps.
    #[arg(long, global = true)]
    pub pages: Option<PathBuf>,
    /// Gold labels (`lang<TAB>pageid<TAB>id,id`).
    #[arg(long, global = true)]
    pub labels: Option<PathBuf>,
    /// Link groups (`group<TAB>lang<TAB>pageid`).
    #[arg(long, global = true)]
    pub links: Option<PathBuf>,
    /// Prediction records to read.
    #[arg(long, global = true)]
    pub pred: Option<PathBuf>,
    /// Checkpoint to read.
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    /// Output file; standard output when omitted (checkpoints require it).
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// Document vectors from an external encoder, with `--vector-ids`.
    #[arg(long, global = true)]
    pub vectors: Option<PathBuf>,
    /// Row index of each vector (`row<TAB>lang<TAB>pageid`).
    #[arg(long, global = true)]
    pub vector_ids: Option<PathBuf>,
    /// Comma-separated language filter.
    #[arg(long, global = true, value_delimiter = ',')]
    pub languages: Option<Vec<String>>,
    /// Language to fine-tune on.
    #[arg(long, global = true)]
    pub language: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub preset: Option<PresetArg>,
    #[arg(long, global = true)]
    pub max_len: Option<usize>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub finetune_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Frequency-weighted loss.
    #[arg(long, global = true)]
    pub weighting: Option<bool>,
    #[arg(long, global = true, value_enum)]
    pub arch: Option<ArchArg>,
    #[arg(long, global = true, value_enum)]
    pub feedback: Option<FeedbackArg>,
    #[arg(long, global = true, value_enum)]
    pub content: Option<ContentArg>,
    #[arg(long, global = true)]
    pub vocab_size: Option<usize>,
    #[arg(long, global = true)]
    pub embed_dim: Option<usize>,
    #[arg(long, global = true)]
    pub hidden_dim: Option<usize>,
    #[arg(long, global = true)]
    pub holdout_fraction: Option<f64>,
    /// Early-stopping patience in epochs; 0 disables early stopping.
    #[arg(long, global = true)]
    pub patience: Option<usize>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Keep only labels voted strictly above the mean count.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub strict_vote: Option<bool>,
    #[arg(long, global = true, value_enum)]
    pub vote: Option<VoteArg>,
    /// How predictions for pages without gold labels are scored.
    #[arg(long, global = true, value_enum)]
    pub score_extra: Option<ScoreExtraArg>,
    /// Skip malformed input records instead of failing.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub skip_malformed: Option<bool>,
    /// Number of histogram entries to print.
    #[arg(long, global = true)]
    pub top: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    /// Use a generated corpus instead of files (ablate only).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub synthetic: Option<bool>,
}

macro_rules! merge_fields {
    ($cli:expr, $file:expr, $($f:ident),* $(,)?) => {
        Settings { $($f: $cli.$f.or($file.$f)),* }
    };
}

impl Settings {
    /// Field-wise merge; values in `self` win.
    pub fn merged_with(self, file: Settings) -> Settings {
        merge_fields!(
            self, file, taxonomy, pages, labels, links, pred, checkpoint, output, vectors, vector_ids, languages,
            language, preset, max_len, epochs, finetune_epochs, batch_size, learning_rate, seed, threshold, weighting,
            arch, feedback, content, vocab_size, embed_dim, hidden_dim, holdout_fraction, patience, workers,
            strict_vote, vote, score_extra, skip_malformed, top, format, synthetic,
        )
    }

    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
    }

    pub fn pipeline(&self) -> PipelineConfig {
        self.pipeline_over(match self.preset {
            Some(PresetArg::Transformer) => PipelineConfig::transformer_preset(),
            _ => PipelineConfig::default(),
        })
    }

    /// Applies the set fields on top of `base`.
    pub fn pipeline_over(&self, base: PipelineConfig) -> PipelineConfig {
        let mut c = base;
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(max_len, epochs, batch_size, learning_rate, seed, threshold, weighting, vocab_size, embed_dim, hidden_dim, holdout_fraction, workers);
        c.finetune_epochs = self.finetune_epochs.or(self.epochs).unwrap_or(c.finetune_epochs);
        if let Some(p) = self.patience {
            c.patience = (p > 0).then_some(p);
        }
        if self.languages.is_some() {
            c.languages = self.languages.clone();
        }
        if let Some(a) = self.arch {
            c.arch = match a {
                ArchArg::Hierarchical => HeadArch::Hierarchical,
                ArchArg::Flat => HeadArch::Flat,
            };
        }
        if let Some(f) = self.feedback {
            c.feedback = match f {
                FeedbackArg::Logits => Feedback::Logits,
                FeedbackArg::Sigmoid => Feedback::Sigmoid,
            };
        }
        if self.content.is_some() {
            c.content = self.content_rule();
        }
        c
    }

    pub fn content_rule(&self) -> ContentRule {
        match self.content {
            Some(ContentArg::OpeningText) => ContentRule::OpeningAndText,
            _ => ContentRule::Text,
        }
    }

    pub fn read_mode(&self) -> ReadMode {
        if self.skip_malformed.unwrap_or(false) { ReadMode::Skip } else { ReadMode::Strict }
    }

    pub fn vote_mode(&self) -> VoteMode {
        match self.vote {
            Some(VoteArg::Advisory) => VoteMode::Advisory,
            _ => VoteMode::Overwrite,
        }
    }

    pub fn vote_rule(&self) -> VoteRule {
        if self.strict_vote.unwrap_or(false) { VoteRule::AboveMean } else { VoteRule::AtLeastMean }
    }

    pub fn extra_pages(&self) -> ExtraPages {
        match self.score_extra {
            Some(ScoreExtraArg::Fp) => ExtraPages::FalsePositive,
            _ => ExtraPages::Ignore,
        }
    }

    pub fn format(&self) -> FormatArg {
        self.format.unwrap_or(FormatArg::Text)
    }

    /// The path for `name`, which must be set and exist.
    pub fn require(&self, name: &str, value: &Option<PathBuf>) -> Result<PathBuf> {
        let path = value.clone().ok_or_else(|| Error::Usage(format!("--{name} is required")))?;
        if !path.exists() {
            return Err(Error::Data(format!("{}: no such file or directory", path.display())));
        }
        Ok(path)
    }
}
