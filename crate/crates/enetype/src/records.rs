//! Newline-delimited JSON prediction records.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use enetype_core::{PageKey, PredictionSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PredictionRecord {
    lang: String,
    pageid: String,
    labels: BTreeSet<String>,
    #[serde(default)]
    scores: BTreeMap<String, f64>,
    #[serde(default)]
    fallback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    voted: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tally: Option<BTreeMap<String, u64>>,
}

/// Serializes one prediction. `with_vote` adds the `voted` field.
pub fn to_line(p: &PredictionSet, with_vote: bool) -> String {
    let record = PredictionRecord {
        lang: p.language.clone(),
        pageid: p.page_id.clone(),
        labels: p.labels.clone(),
        scores: p.scores.clone(),
        fallback: p.fallback,
        voted: with_vote.then_some(p.voted),
        tally: if with_vote { p.tally.clone() } else { None },
    };
    serde_json::to_string(&record).expect("prediction record serializes")
}

pub fn write_predictions<'a, W, I>(mut out: W, predictions: I, with_vote: bool) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a PredictionSet>,
{
    for p in predictions {
        writeln!(out, "{}", to_line(p, with_vote))?;
    }
    out.flush()
}

pub fn read_predictions<R: BufRead>(reader: R, source: &str) -> Result<BTreeMap<PageKey, PredictionSet>> {
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: PredictionRecord = serde_json::from_str(&line).map_err(|e| Error::parse(source, i + 1, e.to_string()))?;
        let p = PredictionSet {
            language: r.lang,
            page_id: r.pageid,
            labels: r.labels,
            scores: r.scores,
            fallback: r.fallback,
            voted: r.voted.unwrap_or(false),
            tally: r.tally,
        };
        if out.insert(p.key(), p).is_some() {
            return Err(Error::parse(source, i + 1, "duplicate prediction for page"));
        }
    }
    Ok(out)
}

/// Label sets keyed by page, for scoring.
pub fn label_sets(predictions: &BTreeMap<PageKey, PredictionSet>) -> BTreeMap<PageKey, BTreeSet<String>> {
    predictions.iter().map(|(k, p)| (k.clone(), p.labels.clone())).collect()
}
