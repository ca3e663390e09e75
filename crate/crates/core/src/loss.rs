//! Frequency-weighted per-level binary cross-entropy on logits.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::taxonomy::LevelTargets;

/// Per-label loss weights for levels 2, 3 and the assignable level.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    pub w2: Vec<f64>,
    pub w3: Vec<f64>,
    pub w4: Vec<f64>,
}

impl LossWeights {
    /// All-ones weights, i.e. the unweighted loss.
    pub fn uniform(dims: [usize; 3]) -> Self {
        LossWeights { w2: vec![1.0; dims[0]], w3: vec![1.0; dims[1]], w4: vec![1.0; dims[2]] }
    }

    pub fn levels(&self) -> [&[f64]; 3] {
        [&self.w2, &self.w3, &self.w4]
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.w2.len(), self.w3.len(), self.w4.len()]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|w| w * factor).collect();
        LossWeights { w2: s(&self.w2), w3: s(&self.w3), w4: s(&self.w4) }
    }
}

/// `w_j = min(k / c_j, 1)` where `k` is the mean of the count vector.
/// Labels never seen (`c_j = 0`) get weight 1.
pub fn level_weights(counts: &[u64]) -> Option<Vec<f64>> {
    if counts.is_empty() {
        return None;
    }
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / counts.len() as f64;
    Some(
        counts
            .iter()
            .map(|&c| if c == 0 { 1.0 } else { (mean / c as f64).min(1.0) })
            .collect(),
    )
}

pub fn compute_weights(counts: [&[u64]; 3]) -> Result<LossWeights> {
    let level = |i: usize| level_weights(counts[i]).ok_or(Error::EmptyLevel(i + 2));
    Ok(LossWeights { w2: level(0)?, w3: level(1)?, w4: level(2)? })
}

/// Per-label positive counts over (ancestor-closed) targets.
pub fn count_labels<'a, I>(dims: [usize; 3], targets: I) -> [Vec<u64>; 3]
where
    I: IntoIterator<Item = &'a LevelTargets>,
{
    let mut counts = [vec![0u64; dims[0]], vec![0u64; dims[1]], vec![0u64; dims[2]]];
    for t in targets {
        for (count, level) in counts.iter_mut().zip(t.levels()) {
            for (c, y) in count.iter_mut().zip(level) {
                if *y > 0.5 {
                    *c += 1;
                }
            }
        }
    }
    counts
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `-[y log σ(z) + (1 - y) log(1 - σ(z))]` in the form that never overflows.
pub fn bce_with_logits(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + libm::log1p(libm::exp(-z.abs()))
}

/// `(1/M) Σ_j w_j bce(z_j, y_j)`; zero for an empty level.
pub fn level_loss(logits: &[f64], targets: &[f64], weights: &[f64]) -> Result<f64> {
    check_len("level targets", logits.len(), targets.len())?;
    check_len("level weights", logits.len(), weights.len())?;
    if logits.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = logits
        .iter()
        .zip(targets)
        .zip(weights)
        .map(|((z, y), w)| w * bce_with_logits(*z, *y))
        .sum();
    Ok(sum / logits.len() as f64)
}

/// Gradient of `level_loss` with respect to the logits.
pub fn level_loss_grad(logits: &[f64], targets: &[f64], weights: &[f64]) -> Vec<f64> {
    let m = logits.len() as f64;
    logits
        .iter()
        .zip(targets)
        .zip(weights)
        .map(|((z, y), w)| w * (sigmoid(*z) - y) / m)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;

    #[test]
    fn weights_hand_cases() {
        assert_eq!(level_weights(&[4, 1, 1]).unwrap(), vec![0.5, 1.0, 1.0]);
        assert_eq!(level_weights(&[5, 5, 5]).unwrap(), vec![1.0, 1.0, 1.0]);
        assert_eq!(level_weights(&[2, 0]).unwrap(), vec![0.5, 1.0]);
        assert_eq!(level_weights(&[0, 0]).unwrap(), vec![1.0, 1.0]);
        assert!(level_weights(&[]).is_none());
        assert_eq!(compute_weights([&[1], &[], &[1]]).unwrap_err(), Error::EmptyLevel(3));
    }

    #[test]
    fn zero_logits_give_ln2() {
        for y in [0.0, 1.0, 0.3] {
            assert!((bce_with_logits(0.0, y) - LN_2).abs() < 1e-15);
        }
        let l = level_loss(&[0.0, 0.0], &[1.0, 0.0], &[0.5, 1.0]).unwrap();
        assert!((l - 0.75 * LN_2).abs() < 1e-15);
        assert!((l - 0.519860).abs() < 1e-6);
    }

    #[test]
    fn saturated_logits_stay_finite() {
        assert!(bce_with_logits(1000.0, 1.0).abs() < 1e-300);
        assert!((bce_with_logits(1000.0, 0.0) - 1000.0).abs() < 1e-9);
        assert!((bce_with_logits(-1000.0, 1.0) - 1000.0).abs() < 1e-9);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!(level_loss(&[1e4, -1e4], &[0.0, 1.0], &[1.0, 1.0]).unwrap().is_finite());
    }

    #[test]
    fn counts_over_targets() {
        let t = LevelTargets { y2: vec![1.0, 0.0], y3: vec![1.0], y4: vec![0.0, 1.0, 1.0] };
        let counts = count_labels([2, 1, 3], [&t, &t]);
        assert_eq!(counts, [vec![2, 0], vec![2], vec![0, 2, 2]]);
    }

    proptest::proptest! {
        #[test]
        fn weights_bounded(counts in proptest::collection::vec(0u64..1000, 1..20)) {
            let w = level_weights(&counts).unwrap();
            let mean = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
            for (c, w) in counts.iter().zip(&w) {
                proptest::prop_assert!(*w > 0.0 && *w <= 1.0);
                if (*c as f64) <= mean {
                    proptest::prop_assert_eq!(*w, 1.0);
                }
            }
        }
    }
}
