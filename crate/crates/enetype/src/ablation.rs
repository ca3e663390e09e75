//! The full three-stage workflow on an in-memory dataset, and the
//! four-configuration ablation built on it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use enetype_core::{
    apply_voting, micro_f1, Checkpoint, Executor, ExtraPages, HeadArch, LinkGroup, Metrics, PageKey, PredictionSet,
    Taxonomy, VoteMode, VoteRule,
};
use enetype_core::voting::VotingSummary;

use crate::corpus::{Corpus, GoldLabels, ReadMode};
use crate::error::Result;
use crate::pipeline::{finetune, train_multilingual, Features, PipelineConfig, Predictor, StageOutcome};

pub struct Dataset<'a> {
    pub taxonomy: &'a Taxonomy,
    pub corpus: &'a Corpus,
    pub gold: &'a GoldLabels,
    pub links: &'a [LinkGroup],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoteSettings {
    pub mode: VoteMode,
    pub rule: VoteRule,
}

#[derive(Debug, Clone)]
pub struct WorkflowOutcome {
    pub multilingual: StageOutcome,
    pub finetuned: BTreeMap<String, StageOutcome>,
    /// Final predictions for every page, after voting when enabled.
    pub predictions: BTreeMap<PageKey, PredictionSet>,
    pub voting: Option<VotingSummary>,
    /// Held-out gold per language.
    pub holdout_gold: BTreeMap<String, BTreeMap<PageKey, BTreeSet<String>>>,
    /// Held-out scores of the stage-1 model per language.
    pub multilingual_metrics: BTreeMap<String, Metrics>,
    /// Held-out scores of each fine-tuned model before voting.
    pub finetuned_metrics: BTreeMap<String, Metrics>,
    /// Held-out scores of the final predictions per language.
    pub metrics: BTreeMap<String, Metrics>,
}

fn label_sets(predictions: &BTreeMap<PageKey, PredictionSet>) -> BTreeMap<PageKey, BTreeSet<String>> {
    predictions.iter().map(|(k, p)| (k.clone(), p.labels.clone())).collect()
}

fn predict_all<E: Executor>(
    checkpoint: &Checkpoint,
    data: &Dataset,
    features: &Features,
    config: &PipelineConfig,
    lang: &str,
    exec: &E,
) -> Result<Vec<PredictionSet>> {
    let predictor = Predictor::new(&checkpoint.model, data.taxonomy, features, config.threshold)?;
    let pages = data.corpus.get(lang).map(Vec::as_slice).unwrap_or_default();
    Ok(predictor.predict_batch(pages, exec, ReadMode::Strict)?.0)
}

/// Train, fine-tune every language, predict each language with its own
/// model, optionally vote, and score held-out pages per language.
pub fn run_workflow<E: Executor>(
    data: &Dataset,
    features: &Features,
    config: &PipelineConfig,
    voting: Option<VoteSettings>,
    exec: &E,
) -> Result<WorkflowOutcome> {
    let multilingual = train_multilingual(data.corpus, data.gold, data.taxonomy, features, config, exec)?;
    let languages: Vec<String> = data.corpus.keys().filter(|l| config.languages.as_ref().is_none_or(|s| s.contains(l))).cloned().collect();

    let mut holdout_gold: BTreeMap<String, BTreeMap<PageKey, BTreeSet<String>>> = BTreeMap::new();
    for key in multilingual.split.holdout_keys() {
        let labels = data.gold.get(key).cloned().unwrap_or_default();
        holdout_gold.entry(key.0.clone()).or_default().insert(key.clone(), labels);
    }

    let mut finetuned = BTreeMap::new();
    let mut predictions = BTreeMap::new();
    let mut multilingual_metrics = BTreeMap::new();
    for lang in &languages {
        let base_preds = predict_all(&multilingual.checkpoint, data, features, config, lang, exec)?;
        let gold = holdout_gold.get(lang).cloned().unwrap_or_default();
        let base_sets = base_preds.iter().map(|p| (p.key(), p.labels.clone())).collect();
        multilingual_metrics.insert(lang.clone(), micro_f1(&base_sets, &gold, ExtraPages::Ignore));

        let stage = finetune(&multilingual.checkpoint, data.corpus, data.gold, data.taxonomy, features, lang, config, exec)?;
        for p in predict_all(&stage.checkpoint, data, features, config, lang, exec)? {
            predictions.insert(p.key(), p);
        }
        finetuned.insert(lang.clone(), stage);
    }

    let score = |predictions: &BTreeMap<PageKey, PredictionSet>| -> BTreeMap<String, Metrics> {
        let sets = label_sets(predictions);
        languages
            .iter()
            .map(|lang| {
                let gold = holdout_gold.get(lang).cloned().unwrap_or_default();
                (lang.clone(), micro_f1(&sets, &gold, ExtraPages::Ignore))
            })
            .collect()
    };
    let finetuned_metrics = score(&predictions);
    let voting = match voting {
        Some(v) => Some(apply_voting(data.links, &mut predictions, v.mode, v.rule)?),
        None => None,
    };
    let metrics = score(&predictions);
    Ok(WorkflowOutcome {
        multilingual,
        finetuned,
        predictions,
        voting,
        holdout_gold,
        multilingual_metrics,
        finetuned_metrics,
        metrics,
    })
}

/// The four ablation configurations, in report order.
pub const CONFIGURATIONS: [&str; 4] = ["flat", "+hierarchy", "+weighting", "+voting"];

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub config: String,
    /// Per-language held-out metrics; empty when the row failed.
    pub languages: BTreeMap<String, Metrics>,
    pub error: Option<String>,
}

impl AblationRow {
    /// Mean F1 over languages.
    pub fn average_f1(&self) -> Option<f64> {
        if self.languages.is_empty() {
            return None;
        }
        Some(self.languages.values().map(|m| m.f1).sum::<f64>() / self.languages.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

/// Runs every configuration from the same seed. Failures are recorded on
/// their row and do not stop the remaining rows.
pub fn run_ablation<E: Executor>(
    data: &Dataset,
    features: &Features,
    base: &PipelineConfig,
    vote: VoteSettings,
    exec: &E,
) -> AblationReport {
    let rows = CONFIGURATIONS
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let config = PipelineConfig {
                arch: if i == 0 { HeadArch::Flat } else { HeadArch::Hierarchical },
                weighting: i >= 2,
                ..base.clone()
            };
            let voting = (i == 3).then_some(vote);
            log::info!("ablation: {name}");
            match run_workflow(data, features, &config, voting, exec) {
                Ok(out) => AblationRow { config: name.to_string(), languages: out.metrics, error: None },
                Err(e) => {
                    log::error!("ablation row {name} failed: {e}");
                    AblationRow { config: name.to_string(), languages: BTreeMap::new(), error: Some(e.to_string()) }
                }
            }
        })
        .collect();
    AblationReport { rows }
}

impl AblationReport {
    /// `config<TAB>lang<TAB>precision<TAB>recall<TAB>f1`, with an `avg`
    /// line per row. Failed rows print `failed` in every numeric column.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("config\tlang\tprecision\trecall\tf1\n");
        for row in &self.rows {
            if row.error.is_some() {
                writeln!(out, "{}\tavg\tfailed\tfailed\tfailed", row.config).expect("string write");
                continue;
            }
            for (lang, m) in &row.languages {
                writeln!(out, "{}\t{lang}\t{:.6}\t{:.6}\t{:.6}", row.config, m.precision, m.recall, m.f1).expect("string write");
            }
            let n = row.languages.len().max(1) as f64;
            let p = row.languages.values().map(|m| m.precision).sum::<f64>() / n;
            let r = row.languages.values().map(|m| m.recall).sum::<f64>() / n;
            writeln!(out, "{}\tavg\t{p:.6}\t{r:.6}\t{:.6}", row.config, row.average_f1().unwrap_or(0.0)).expect("string write");
        }
        out
    }

    pub fn to_text(&self) -> String {
        let langs: BTreeSet<&String> = self.rows.iter().flat_map(|r| r.languages.keys()).collect();
        let mut out = format!("{:<12}", "config");
        for l in &langs {
            write!(out, " {l:>8}").expect("string write");
        }
        out.push_str("      avg\n");
        for row in &self.rows {
            write!(out, "{:<12}", row.config).expect("string write");
            match &row.error {
                Some(e) => {
                    writeln!(out, " failed: {e}").expect("string write");
                }
                None => {
                    for l in &langs {
                        let f = row.languages.get(*l).map_or(0.0, |m| m.f1 * 100.0);
                        write!(out, " {f:>8.2}").expect("string write");
                    }
                    writeln!(out, " {:>8.2}", row.average_f1().unwrap_or(0.0) * 100.0).expect("string write");
                }
            }
        }
        out
    }
}
