//! The four-level category tree and per-level multi-hot target encoding.
//!
//! Levels 2 and 3 are vectorized by tree depth. The finest "level 4" vector
//! is the prediction space: every label the definition file marks
//! assignable, whatever its depth. Level 1 is stored but never vectorized.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::label::{EneLabel, MAX_DEPTH};
use crate::tokenizer::Fnv1a;

/// One record of a taxonomy definition file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaxonomyRecord {
    pub label: EneLabel,
    /// `None` when the file omits the column; leaves then default to assignable.
    pub assignable: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct Taxonomy {
    labels: Vec<EneLabel>,
    assignable: Vec<bool>,
    index: BTreeMap<String, usize>,
    parent: Vec<Option<usize>>,
    by_depth: [Vec<usize>; MAX_DEPTH],
    depth_position: Vec<usize>,
    outputs: Vec<usize>,
    output_position: Vec<Option<usize>>,
    content_hash: u64,
}

/// Multi-hot ground truth for levels 2, 3 and the assignable (finest) level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTargets {
    pub y2: Vec<f64>,
    pub y3: Vec<f64>,
    pub y4: Vec<f64>,
}

impl LevelTargets {
    pub fn zeros(dims: [usize; 3]) -> Self {
        LevelTargets { y2: vec![0.0; dims[0]], y3: vec![0.0; dims[1]], y4: vec![0.0; dims[2]] }
    }

    pub fn levels(&self) -> [&[f64]; 3] {
        [&self.y2, &self.y3, &self.y4]
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.y2.len(), self.y3.len(), self.y4.len()]
    }

    /// Positions of the finest level that are switched on.
    pub fn active_outputs(&self) -> BTreeSet<usize> {
        self.y4.iter().enumerate().filter(|(_, v)| **v > 0.5).map(|(i, _)| i).collect()
    }

    /// Elementwise maximum, i.e. logical OR for 0/1 vectors.
    pub fn union(&self, other: &LevelTargets) -> LevelTargets {
        let or = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x.max(*y)).collect();
        LevelTargets {
            y2: or(&self.y2, &other.y2),
            y3: or(&self.y3, &other.y3),
            y4: or(&self.y4, &other.y4),
        }
    }
}

/// Parses the tab-separated definition format `id[<TAB>assignable[<TAB>name]]`.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_definition(text: &str) -> Result<Vec<TaxonomyRecord>> {
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let id = fields.next().unwrap_or_default().trim();
        let label = EneLabel::parse(id).map_err(|e| Error::MalformedTaxonomyLine {
            line: n + 1,
            reason: e.to_string(),
        })?;
        let assignable = match fields.next().map(str::trim) {
            None | Some("") => None,
            Some("1") => Some(true),
            Some("0") => Some(false),
            Some(other) => {
                return Err(Error::MalformedTaxonomyLine {
                    line: n + 1,
                    reason: alloc::format!("assignable flag must be 0 or 1, got {other:?}"),
                })
            }
        };
        let label = match fields.next().map(str::trim) {
            Some(name) if !name.is_empty() => label.with_name(name),
            _ => label,
        };
        records.push(TaxonomyRecord { label, assignable });
    }
    Ok(records)
}

impl Taxonomy {
    /// Parses and validates a definition file body.
    pub fn load(text: &str) -> Result<Self> {
        Self::from_records(parse_definition(text)?)
    }

    /// Builds the index. Positions follow record order within each level.
    pub fn from_records(records: Vec<TaxonomyRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyTaxonomy);
        }
        let mut index = BTreeMap::new();
        for (i, record) in records.iter().enumerate() {
            if index.insert(record.label.id().to_string(), i).is_some() {
                return Err(Error::DuplicateLabel(record.label.id().to_string()));
            }
        }
        let mut parent = Vec::with_capacity(records.len());
        let mut has_children = vec![false; records.len()];
        for record in &records {
            match record.label.parent_id() {
                None => parent.push(None),
                Some(pid) => {
                    let p = *index.get(&pid).ok_or_else(|| Error::OrphanLabel {
                        id: record.label.id().to_string(),
                        parent: pid.clone(),
                    })?;
                    has_children[p] = true;
                    parent.push(Some(p));
                }
            }
        }

        let mut by_depth: [Vec<usize>; MAX_DEPTH] = Default::default();
        let mut depth_position = Vec::with_capacity(records.len());
        let mut assignable = Vec::with_capacity(records.len());
        let mut outputs = Vec::new();
        let mut output_position = Vec::with_capacity(records.len());
        let mut hasher = Fnv1a::new();
        for (i, record) in records.iter().enumerate() {
            let level = &mut by_depth[record.label.level() - 1];
            depth_position.push(level.len());
            level.push(i);
            let flag = record.assignable.unwrap_or(!has_children[i]);
            assignable.push(flag);
            if flag {
                output_position.push(Some(outputs.len()));
                outputs.push(i);
            } else {
                output_position.push(None);
            }
            hasher.write(record.label.id().as_bytes());
            hasher.write(if flag { b"\t1\n" } else { b"\t0\n" });
        }

        Ok(Taxonomy {
            labels: records.into_iter().map(|r| r.label).collect(),
            assignable,
            index,
            parent,
            by_depth,
            depth_position,
            outputs,
            output_position,
            content_hash: hasher.finish(),
        })
    }

    /// Number of labels at tree depths 1 through 4.
    pub fn level_sizes(&self) -> [usize; MAX_DEPTH] {
        [
            self.by_depth[0].len(),
            self.by_depth[1].len(),
            self.by_depth[2].len(),
            self.by_depth[3].len(),
        ]
    }

    /// Dimensions of the three vectorized levels: depth 2, depth 3, assignable.
    pub fn head_dims(&self) -> [usize; 3] {
        [self.by_depth[1].len(), self.by_depth[2].len(), self.outputs.len()]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Hash over ids and assignability flags in file order; names excluded.
    pub fn content_hash(&self) -> u64 {
        self.content_hash
    }

    pub fn get(&self, id: &str) -> Option<&EneLabel> {
        self.index.get(id).map(|&i| &self.labels[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn labels(&self) -> &[EneLabel] {
        &self.labels
    }

    pub fn labels_at_depth(&self, depth: usize) -> impl Iterator<Item = &EneLabel> + '_ {
        self.by_depth[depth - 1].iter().map(move |&i| &self.labels[i])
    }

    pub fn is_assignable(&self, id: &str) -> bool {
        self.index.get(id).is_some_and(|&i| self.assignable[i])
    }

    /// Assignable labels in prediction-vector order.
    pub fn outputs(&self) -> impl ExactSizeIterator<Item = &EneLabel> + '_ {
        self.outputs.iter().map(move |&i| &self.labels[i])
    }

    pub fn output_label(&self, position: usize) -> Option<&EneLabel> {
        self.outputs.get(position).map(|&i| &self.labels[i])
    }

    pub fn output_position(&self, id: &str) -> Option<usize> {
        self.index.get(id).and_then(|&i| self.output_position[i])
    }

    /// `(depth, position within depth)` of a label.
    pub fn position(&self, id: &str) -> Option<(usize, usize)> {
        self.index.get(id).map(|&i| (self.labels[i].level(), self.depth_position[i]))
    }

    pub fn parent(&self, id: &str) -> Option<&EneLabel> {
        self.index.get(id).and_then(|&i| self.parent[i]).map(|p| &self.labels[p])
    }

    /// Strict ancestors, shallow to deep.
    pub fn ancestors(&self, id: &str) -> Result<Vec<&EneLabel>> {
        let mut at = *self.index.get(id).ok_or_else(|| Error::UnknownLabel(id.to_string()))?;
        let mut chain = Vec::new();
        while let Some(p) = self.parent[at] {
            chain.push(&self.labels[p]);
            at = p;
        }
        chain.reverse();
        Ok(chain)
    }

    /// Encodes a gold label set with ancestor closure. A label switches on its
    /// own depth-2/3 slot, the slots of its depth-2/3 ancestors, and its
    /// prediction slot when it is assignable.
    pub fn encode_targets<'a, I>(&self, ids: I) -> Result<LevelTargets>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut targets = LevelTargets::zeros(self.head_dims());
        for id in ids {
            let idx = *self.index.get(id).ok_or_else(|| Error::UnknownLabel(id.to_string()))?;
            if let Some(pos) = self.output_position[idx] {
                targets.y4[pos] = 1.0;
            }
            let mut at = Some(idx);
            while let Some(i) = at {
                let pos = self.depth_position[i];
                match self.labels[i].level() {
                    2 => targets.y2[pos] = 1.0,
                    3 => targets.y3[pos] = 1.0,
                    _ => {}
                }
                at = self.parent[i];
            }
        }
        Ok(targets)
    }

    /// True when every active slot has its depth-2/3 ancestors active.
    pub fn is_ancestor_closed(&self, targets: &LevelTargets) -> bool {
        let active = |i: usize| -> bool {
            let pos = self.depth_position[i];
            match self.labels[i].level() {
                2 => targets.y2[pos] > 0.5,
                3 => targets.y3[pos] > 0.5,
                _ => true,
            }
        };
        let check_chain = |start: usize| {
            let mut at = self.parent[start];
            while let Some(p) = at {
                if !active(p) {
                    return false;
                }
                at = self.parent[p];
            }
            true
        };
        let depth_ok = |depth: usize, vector: &[f64]| {
            self.by_depth[depth - 1]
                .iter()
                .zip(vector)
                .all(|(&i, v)| *v < 0.5 || check_chain(i))
        };
        depth_ok(2, &targets.y2)
            && depth_ok(3, &targets.y3)
            && self.outputs.iter().zip(&targets.y4).all(|(&i, v)| *v < 0.5 || (active(i) && check_chain(i)))
    }
}
