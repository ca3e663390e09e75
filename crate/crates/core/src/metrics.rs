//! Micro-averaged precision, recall and F1, plus label histograms.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_counts(true_pos: u64, false_pos: u64, false_neg: u64) -> Self {
        let precision = ratio(true_pos, true_pos + false_pos);
        let recall = ratio(true_pos, true_pos + false_neg);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Metrics { true_pos, false_pos, false_neg, precision, recall, f1 }
    }

    pub fn merge(&self, other: &Metrics) -> Metrics {
        Metrics::from_counts(
            self.true_pos + other.true_pos,
            self.false_pos + other.false_pos,
            self.false_neg + other.false_neg,
        )
    }
}

/// Whether predictions for pages absent from gold count as false positives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExtraPages {
    #[default]
    Ignore,
    FalsePositive,
}

/// Pools exact-match counts over all gold pages. Gold pages without a
/// prediction contribute only false negatives.
pub fn micro_f1<K: Ord, L: Ord>(
    predictions: &BTreeMap<K, BTreeSet<L>>,
    gold: &BTreeMap<K, BTreeSet<L>>,
    extra: ExtraPages,
) -> Metrics {
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (key, truth) in gold {
        match predictions.get(key) {
            Some(pred) => {
                let hit = pred.intersection(truth).count() as u64;
                tp += hit;
                fp += pred.len() as u64 - hit;
                fn_ += truth.len() as u64 - hit;
            }
            None => fn_ += truth.len() as u64,
        }
    }
    if extra == ExtraPages::FalsePositive {
        fp += predictions
            .iter()
            .filter(|(k, _)| !gold.contains_key(*k))
            .map(|(_, p)| p.len() as u64)
            .sum::<u64>();
    }
    Metrics::from_counts(tp, fp, fn_)
}

/// Label frequencies, descending by count then ascending by id.
pub fn label_histogram<'a, I>(label_sets: I, top: Option<usize>) -> Vec<(String, u64)>
where
    I: IntoIterator<Item = &'a BTreeSet<String>>,
{
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for set in label_sets {
        for label in set {
            *counts.entry(label.as_str()).or_default() += 1;
        }
    }
    let mut rows: Vec<(String, u64)> = counts.into_iter().map(|(l, c)| (String::from(l), c)).collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if let Some(n) = top {
        rows.truncate(n);
    }
    rows
}
