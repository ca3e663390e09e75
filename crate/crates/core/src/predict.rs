//! Thresholded label assignment from the finest-level logits.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::loss::sigmoid;
use crate::taxonomy::Taxonomy;

/// `(language, page id)`.
pub type PageKey = (String, String);

/// Selected output positions with their sigmoid scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub positions: Vec<usize>,
    pub scores: Vec<f64>,
    /// Nothing reached the threshold and the single best label was taken.
    pub fallback: bool,
}

/// Every position with `σ(z) >= threshold`; the argmax if none qualifies.
pub fn assign(logits: &[f64], threshold: f64) -> Assignment {
    let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
    let positions: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] >= threshold).collect();
    if !positions.is_empty() || probs.is_empty() {
        let scores = positions.iter().map(|&i| probs[i]).collect();
        return Assignment { positions, scores, fallback: false };
    }
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] || (*p == probs[best] && logits[i] > logits[best]) {
            best = i;
        }
    }
    Assignment { positions: alloc::vec![best], scores: alloc::vec![probs[best]], fallback: true }
}

/// Labels assigned to one page.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub language: String,
    pub page_id: String,
    pub labels: BTreeSet<String>,
    /// Sigmoid score of each assigned label.
    pub scores: BTreeMap<String, f64>,
    pub fallback: bool,
    pub voted: bool,
    pub tally: Option<BTreeMap<String, u64>>,
}

impl PredictionSet {
    pub fn new(language: &str, page_id: &str, labels: BTreeSet<String>) -> Self {
        PredictionSet {
            language: language.into(),
            page_id: page_id.into(),
            labels,
            scores: BTreeMap::new(),
            fallback: false,
            voted: false,
            tally: None,
        }
    }

    pub fn from_assignment(language: &str, page_id: &str, assignment: &Assignment, taxonomy: &Taxonomy) -> Self {
        let mut set = Self::new(language, page_id, BTreeSet::new());
        for (&pos, &score) in assignment.positions.iter().zip(&assignment.scores) {
            let id = taxonomy.output_label(pos).expect("position within prediction space").id().to_string();
            set.scores.insert(id.clone(), score);
            set.labels.insert(id);
        }
        set.fallback = assignment.fallback;
        set
    }

    pub fn key(&self) -> PageKey {
        (self.language.clone(), self.page_id.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_logits_select_everything() {
        let a = assign(&[0.0; 4], 0.5);
        assert_eq!(a.positions, [0, 1, 2, 3]);
        assert!(a.scores.iter().all(|s| *s == 0.5));
        assert!(!a.fallback);
    }

    #[test]
    fn all_negative_falls_back_to_argmax() {
        let a = assign(&[-10.0, -10.0, -3.0, -10.0], 0.5);
        assert_eq!(a.positions, [2]);
        assert!(a.fallback);
        let a = assign(&[-10.0; 3], 0.5);
        assert_eq!(a.positions, [0]);
        assert!(a.fallback);
        assert!(assign(&[], 0.5).positions.is_empty());
    }

    #[test]
    fn half_threshold_is_sign_rule() {
        let logits = [-2.0, -1e-3, 0.0, 1e-3, 5.0];
        let a = assign(&logits, 0.5);
        assert_eq!(a.positions, [2, 3, 4]);
    }

    proptest::proptest! {
        #[test]
        fn threshold_monotone(logits in proptest::collection::vec(-8.0f64..8.0, 1..12), lo in 0.01f64..0.99, d in 0.0f64..0.5) {
            let hi = (lo + d).min(0.99);
            let a = assign(&logits, lo);
            let b = assign(&logits, hi);
            if !b.fallback {
                proptest::prop_assert!(!a.fallback);
                proptest::prop_assert!(b.positions.iter().all(|p| a.positions.contains(p)));
            }
            for (i, z) in logits.iter().enumerate() {
                if !a.fallback {
                    proptest::prop_assert_eq!(a.positions.contains(&i), sigmoid(*z) >= lo);
                }
            }
        }
    }
}
