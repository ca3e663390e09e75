//! Cross-language mean-frequency voting over linked pages.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::predict::{PageKey, PredictionSet};

/// Pages in different languages that share one cross-language identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkGroup {
    pub group_id: String,
    /// language → page id
    pub members: BTreeMap<String, String>,
}

/// Comparison against the mean count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VoteRule {
    /// `count >= mean`
    #[default]
    AtLeastMean,
    /// `count > mean`; falls back to the top-count labels if nothing qualifies.
    AboveMean,
}

/// How the voted set is applied to each member page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VoteMode {
    /// Replace every member's labels with the voted set.
    #[default]
    Overwrite,
    /// Keep the member's own labels that the vote also chose; keep its own
    /// labels unchanged if that intersection is empty.
    Advisory,
}

/// Exact non-negative rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub numer: u64,
    pub denom: u64,
}

impl Ratio {
    /// Compares the integer `count` with this ratio without division.
    pub fn cmp_count(&self, count: u64) -> Ordering {
        (u128::from(count) * u128::from(self.denom)).cmp(&u128::from(self.numer))
    }

    pub fn to_f64(self) -> f64 {
        self.numer as f64 / self.denom as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteResult {
    pub group_id: String,
    pub chosen: BTreeSet<String>,
    pub tally: BTreeMap<String, u64>,
    /// Total count over distinct labels.
    pub mean: Ratio,
}

/// Flattens the ballots, counts each distinct label and keeps those whose
/// count reaches the mean count.
pub fn vote<'a, I>(group_id: &str, ballots: I, rule: VoteRule) -> Result<VoteResult>
where
    I: IntoIterator<Item = &'a BTreeSet<String>>,
{
    let mut tally: BTreeMap<String, u64> = BTreeMap::new();
    for ballot in ballots {
        for label in ballot {
            *tally.entry(label.clone()).or_default() += 1;
        }
    }
    if tally.is_empty() {
        return Err(Error::EmptyBallots);
    }
    let mean = Ratio { numer: tally.values().sum(), denom: tally.len() as u64 };
    let keep = |c: u64| match rule {
        VoteRule::AtLeastMean => mean.cmp_count(c) != Ordering::Less,
        VoteRule::AboveMean => mean.cmp_count(c) == Ordering::Greater,
    };
    let mut chosen: BTreeSet<String> =
        tally.iter().filter(|(_, &c)| keep(c)).map(|(l, _)| l.clone()).collect();
    if chosen.is_empty() {
        let max = tally.values().copied().max().unwrap_or(0);
        chosen = tally.iter().filter(|(_, &c)| c == max).map(|(l, _)| l.clone()).collect();
    }
    Ok(VoteResult { group_id: group_id.into(), chosen, tally, mean })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VotingSummary {
    pub groups_voted: usize,
    pub pages_revised: usize,
    /// Group members without a prediction; skipped.
    pub missing_members: usize,
}

/// Rewrites predictions of linked pages with their group's vote. Votes are
/// computed from the monolingual predictions before any rewrite.
pub fn apply_voting(
    groups: &[LinkGroup],
    predictions: &mut BTreeMap<PageKey, PredictionSet>,
    mode: VoteMode,
    rule: VoteRule,
) -> Result<VotingSummary> {
    let mut summary = VotingSummary::default();
    let mut updates: Vec<(Vec<PageKey>, VoteResult)> = Vec::new();
    for group in groups {
        let mut keys = Vec::new();
        for (lang, page) in &group.members {
            let key = (lang.clone(), page.clone());
            if predictions.contains_key(&key) {
                keys.push(key);
            } else {
                summary.missing_members += 1;
            }
        }
        if keys.len() < 2 {
            continue;
        }
        let ballots = keys.iter().map(|k| &predictions[k].labels);
        let result = vote(&group.group_id, ballots, rule)?;
        updates.push((keys, result));
    }
    for (keys, result) in updates {
        summary.groups_voted += 1;
        for key in keys {
            let pred = predictions.get_mut(&key).expect("member present");
            let labels = match mode {
                VoteMode::Overwrite => result.chosen.clone(),
                VoteMode::Advisory => {
                    let kept: BTreeSet<String> = pred.labels.intersection(&result.chosen).cloned().collect();
                    if kept.is_empty() { pred.labels.clone() } else { kept }
                }
            };
            if labels != pred.labels {
                summary.pages_revised += 1;
            }
            pred.labels = labels;
            pred.voted = true;
            pred.tally = Some(result.tally.clone());
        }
    }
    Ok(summary)
}
