//! Hierarchy-aware prediction head.
//!
//! Level 2 logits come from a linear map of `H`; each deeper level sees `H`
//! concatenated with the logits (or their sigmoids) of every shallower
//! level. The flat variant is a single linear map from `H` to the
//! assignable level and exists for ablation.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngExt};

use crate::error::{check_len, Error, Result};
use crate::grad::TensorGrad;
use crate::loss::{level_loss, level_loss_grad, sigmoid, LossWeights};
use crate::taxonomy::LevelTargets;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadArch {
    Hierarchical,
    Flat,
}

/// What a level forwards to deeper levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Feedback {
    #[default]
    Logits,
    Sigmoid,
}

impl Feedback {
    fn apply(self, z: f64) -> f64 {
        match self {
            Feedback::Logits => z,
            Feedback::Sigmoid => sigmoid(z),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Feedback::Logits => 1.0,
            Feedback::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }
}

/// Dense layer `y = W^T x + b` with `W` stored `in_dim x out_dim` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Linear { in_dim, out_dim, weight: vec![0.0; in_dim * out_dim], bias: vec![0.0; out_dim] }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(in_dim, out_dim);
        if in_dim + out_dim > 0 {
            let limit = libm::sqrtf(6.0 / (in_dim + out_dim) as f32);
            layer.weight.iter_mut().for_each(|w| *w = rng.random_range(-limit..=limit));
        }
        layer
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.bias.iter().map(|&b| f64::from(b)).collect();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.weight[i * self.out_dim..][..self.out_dim];
            y.iter_mut().zip(row).for_each(|(y, &w)| *y += xi * f64::from(w));
        }
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub arch: HeadArch,
    pub feedback: Feedback,
    pub hidden_dim: usize,
    pub layers: Vec<Linear>,
}

/// Raw per-level scores. Hierarchical heads hold `[ŷ2, ŷ3, ŷ4]`, flat heads `[ŷ4]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelLogits {
    pub levels: Vec<Vec<f64>>,
}

impl LevelLogits {
    /// Scores of the assignable level.
    pub fn fine(&self) -> &[f64] {
        self.levels.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadBackward {
    pub loss: f64,
    pub logits: LevelLogits,
    /// `[weight, bias]` per layer, in layer order.
    pub grads: Vec<TensorGrad>,
    pub d_hidden: Vec<f64>,
}

impl HeadParams {
    fn layer_dims(arch: HeadArch, hidden_dim: usize, dims: [usize; 3]) -> Vec<(usize, usize)> {
        match arch {
            HeadArch::Hierarchical => vec![
                (hidden_dim, dims[0]),
                (hidden_dim + dims[0], dims[1]),
                (hidden_dim + dims[0] + dims[1], dims[2]),
            ],
            HeadArch::Flat => vec![(hidden_dim, dims[2])],
        }
    }

    pub fn zeros(arch: HeadArch, feedback: Feedback, hidden_dim: usize, dims: [usize; 3]) -> Self {
        let layers = Self::layer_dims(arch, hidden_dim, dims)
            .into_iter()
            .map(|(i, o)| Linear::zeros(i, o))
            .collect();
        HeadParams { arch, feedback, hidden_dim, layers }
    }

    pub fn init<R: Rng + ?Sized>(
        arch: HeadArch,
        feedback: Feedback,
        hidden_dim: usize,
        dims: [usize; 3],
        rng: &mut R,
    ) -> Self {
        let layers = Self::layer_dims(arch, hidden_dim, dims)
            .into_iter()
            .map(|(i, o)| Linear::init(i, o, rng))
            .collect();
        HeadParams { arch, feedback, hidden_dim, layers }
    }

    /// Which of `(y2, y3, y4)` each layer is trained against.
    pub fn target_levels(&self) -> &'static [usize] {
        match self.arch {
            HeadArch::Hierarchical => &[0, 1, 2],
            HeadArch::Flat => &[2],
        }
    }

    /// Output sizes of levels 2, 3 and the assignable level (0 where absent).
    pub fn dims(&self) -> [usize; 3] {
        let mut dims = [0; 3];
        for (layer, &level) in self.layers.iter().zip(self.target_levels()) {
            dims[level] = layer.out_dim;
        }
        dims
    }

    pub fn forward(&self, h: &[f64]) -> Result<LevelLogits> {
        Ok(self.forward_with_inputs(h)?.0)
    }

    fn forward_with_inputs(&self, h: &[f64]) -> Result<(LevelLogits, Vec<Vec<f64>>)> {
        check_len("document vector", self.hidden_dim, h.len())?;
        let mut input = h.to_vec();
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut levels = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.iter().enumerate() {
            check_len("layer input", layer.in_dim, input.len())?;
            let z = layer.apply(&input);
            if k + 1 < self.layers.len() {
                inputs.push(input.clone());
                input.extend(z.iter().map(|&v| self.feedback.apply(v)));
            } else {
                inputs.push(core::mem::take(&mut input));
            }
            levels.push(z);
        }
        Ok((LevelLogits { levels }, inputs))
    }

    fn check_targets(&self, targets: &LevelTargets, weights: &LossWeights) -> Result<()> {
        let t = targets.levels();
        let w = weights.levels();
        for (layer, &level) in self.layers.iter().zip(self.target_levels()) {
            check_len("level targets", layer.out_dim, t[level].len())?;
            check_len("level weights", layer.out_dim, w[level].len())?;
        }
        Ok(())
    }

    /// `J = Σ_levels L_i`.
    pub fn loss(&self, logits: &LevelLogits, targets: &LevelTargets, weights: &LossWeights) -> Result<f64> {
        check_len("logit levels", self.layers.len(), logits.levels.len())?;
        self.check_targets(targets, weights)?;
        let t = targets.levels();
        let w = weights.levels();
        let mut total = 0.0;
        for (z, &level) in logits.levels.iter().zip(self.target_levels()) {
            total += level_loss(z, t[level], w[level])?;
        }
        Ok(total)
    }

    /// Loss, parameter gradients and `dJ/dH`, including the cross-level paths
    /// through the concatenated feedback.
    pub fn backward(&self, h: &[f64], targets: &LevelTargets, weights: &LossWeights) -> Result<HeadBackward> {
        self.check_targets(targets, weights)?;
        let (logits, inputs) = self.forward_with_inputs(h)?;
        let loss = self.loss(&logits, targets, weights)?;
        let t = targets.levels();
        let w = weights.levels();
        let mut dz: Vec<Vec<f64>> = logits
            .levels
            .iter()
            .zip(self.target_levels())
            .map(|(z, &level)| level_loss_grad(z, t[level], w[level]))
            .collect();

        let mut d_hidden = vec![0.0; self.hidden_dim];
        let mut layer_grads: Vec<[TensorGrad; 2]> = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let x = &inputs[k];
            let g = &dz[k];
            let mut gw = vec![0.0; layer.in_dim * layer.out_dim];
            let mut dx = vec![0.0; layer.in_dim];
            for i in 0..layer.in_dim {
                let row = &layer.weight[i * layer.out_dim..][..layer.out_dim];
                let grow = &mut gw[i * layer.out_dim..][..layer.out_dim];
                let mut acc = 0.0;
                for j in 0..layer.out_dim {
                    grow[j] = x[i] * g[j];
                    acc += f64::from(row[j]) * g[j];
                }
                dx[i] = acc;
            }
            let gb = g.clone();
            d_hidden.iter_mut().zip(&dx).for_each(|(d, v)| *d += v);
            let mut offset = self.hidden_dim;
            for (j, dzj) in dz.iter_mut().enumerate().take(k) {
                let dim = self.layers[j].out_dim;
                for (r, dzr) in dzj.iter_mut().enumerate() {
                    *dzr += dx[offset + r] * self.feedback.derivative(logits.levels[j][r]);
                }
                offset += dim;
            }
            layer_grads.push([TensorGrad::Dense(gw), TensorGrad::Dense(gb)]);
        }
        layer_grads.reverse();
        let grads = layer_grads.into_iter().flatten().collect();
        Ok(HeadBackward { loss, logits, grads, d_hidden })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let expected = Self::layer_dims(self.arch, self.hidden_dim, self.dims());
        check_len("head layers", expected.len(), self.layers.len())?;
        for (layer, (i, o)) in self.layers.iter().zip(expected) {
            check_len("layer input", i, layer.in_dim)?;
            check_len("layer weight", i * o, layer.weight.len())?;
            check_len("layer bias", o, layer.bias.len())?;
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidConfig("head has no layers".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;
    use rand::SeedableRng;
    use rand_pcg::Pcg32;

    fn random_targets(rng: &mut Pcg32, dims: [usize; 3]) -> LevelTargets {
        let mut v = |n: usize| (0..n).map(|_| f64::from(rng.random_range(0u8..2))).collect();
        LevelTargets { y2: v(dims[0]), y3: v(dims[1]), y4: v(dims[2]) }
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let head = HeadParams::zeros(HeadArch::Hierarchical, Feedback::Logits, 4, [2, 3, 5]);
        let logits = head.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(logits.levels.iter().map(Vec::len).collect::<Vec<_>>(), [2, 3, 5]);
        assert!(logits.levels.iter().flatten().all(|z| *z == 0.0));
        let targets = LevelTargets::zeros([2, 3, 5]);
        let j = head.loss(&logits, &targets, &LossWeights::uniform([2, 3, 5])).unwrap();
        assert!((j - 3.0 * LN_2).abs() < 1e-12);
    }

    #[test]
    fn concatenation_hand_example() {
        let mut head = HeadParams::zeros(HeadArch::Hierarchical, Feedback::Logits, 2, [1, 1, 1]);
        head.layers[0].weight = vec![1.0, 0.0];
        head.layers[1].weight = vec![0.0, 0.0, 1.0];
        head.layers[2].weight = vec![0.5, -1.0, 2.0, 0.25];
        let logits = head.forward(&[3.0, 5.0]).unwrap();
        assert_eq!(logits.levels[0], vec![3.0]);
        assert_eq!(logits.levels[1], vec![3.0]);
        // W4 · (3, 5, 3, 3)
        assert_eq!(logits.levels[2], vec![0.5 * 3.0 - 5.0 + 2.0 * 3.0 + 0.25 * 3.0]);
    }

    #[test]
    fn shape_errors() {
        let head = HeadParams::zeros(HeadArch::Hierarchical, Feedback::Logits, 2, [1, 1, 1]);
        assert!(matches!(head.forward(&[1.0]).unwrap_err(), Error::ShapeMismatch { .. }));
        let bad = LevelTargets::zeros([1, 2, 1]);
        assert!(head.backward(&[1.0, 1.0], &bad, &LossWeights::uniform([1, 1, 1])).is_err());
    }

    #[test]
    fn flat_head_ignores_upper_levels() {
        let mut rng = Pcg32::seed_from_u64(1);
        let head = HeadParams::init(HeadArch::Flat, Feedback::Logits, 3, [4, 5, 6], &mut rng);
        assert_eq!(head.dims(), [0, 0, 6]);
        let targets = LevelTargets::zeros([4, 5, 6]);
        let out = head.backward(&[0.1, 0.2, 0.3], &targets, &LossWeights::uniform([4, 5, 6])).unwrap();
        assert_eq!(out.logits.levels.len(), 1);
        assert_eq!(out.grads.len(), 2);
    }

    fn fd_check(arch: HeadArch, feedback: Feedback, seed: u64) {
        let mut rng = Pcg32::seed_from_u64(seed);
        let dims = [3, 5, 7];
        let mut head = HeadParams::init(arch, feedback, 8, dims, &mut rng);
        for layer in &mut head.layers {
            layer.bias.iter_mut().for_each(|b| *b = rng.random_range(-1.0f32..1.0));
        }
        let h: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let targets = random_targets(&mut rng, dims);
        let weights = LossWeights {
            w2: (0..3).map(|_| rng.random_range(0.1..1.0)).collect(),
            w3: (0..5).map(|_| rng.random_range(0.1..1.0)).collect(),
            w4: (0..7).map(|_| rng.random_range(0.1..1.0)).collect(),
        };
        let out = head.backward(&h, &targets, &weights).unwrap();
        let j = |p: &HeadParams, h: &[f64]| p.loss(&p.forward(h).unwrap(), &targets, &weights).unwrap();
        let close = |a: f64, n: f64| (a - n).abs() <= 1e-6 || (a - n).abs() / a.abs().max(n.abs()) < 1e-4;
        for (l, layer) in head.layers.iter().enumerate() {
            for (t, len) in [(0, layer.weight.len()), (1, layer.bias.len())] {
                for i in 0..len {
                    let mut plus = head.clone();
                    let mut minus = head.clone();
                    fn get(p: &mut HeadParams, l: usize, t: usize, i: usize) -> &mut f32 {
                        if t == 0 { &mut p.layers[l].weight[i] } else { &mut p.layers[l].bias[i] }
                    }
                    *get(&mut plus, l, t, i) += 1e-3;
                    *get(&mut minus, l, t, i) -= 1e-3;
                    let step = f64::from(*get(&mut plus, l, t, i)) - f64::from(*get(&mut minus, l, t, i));
                    let numeric = (j(&plus, &h) - j(&minus, &h)) / step;
                    let analytic = out.grads[2 * l + t].get(i);
                    assert!(close(analytic, numeric), "layer {l} tensor {t} [{i}]: {analytic} vs {numeric}");
                }
            }
        }
        for i in 0..8 {
            let mut hp = h.clone();
            let mut hm = h.clone();
            hp[i] += 1e-5;
            hm[i] -= 1e-5;
            let numeric = (j(&head, &hp) - j(&head, &hm)) / 2e-5;
            assert!(close(out.d_hidden[i], numeric), "dH[{i}]: {} vs {numeric}", out.d_hidden[i]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..3 {
            fd_check(HeadArch::Hierarchical, Feedback::Logits, seed);
            fd_check(HeadArch::Hierarchical, Feedback::Sigmoid, seed);
            fd_check(HeadArch::Flat, Feedback::Logits, seed);
        }
    }

    #[test]
    fn stationary_at_sigmoid_targets() {
        let mut rng = Pcg32::seed_from_u64(9);
        let head = HeadParams::init(HeadArch::Hierarchical, Feedback::Logits, 4, [2, 3, 4], &mut rng);
        let h = [0.3, -0.2, 0.9, 0.0];
        let logits = head.forward(&h).unwrap();
        let s = |v: &[f64]| v.iter().map(|z| sigmoid(*z)).collect::<Vec<_>>();
        let targets = LevelTargets { y2: s(&logits.levels[0]), y3: s(&logits.levels[1]), y4: s(&logits.levels[2]) };
        let out = head.backward(&h, &targets, &LossWeights::uniform([2, 3, 4])).unwrap();
        assert!(out.grads.iter().all(|g| g.max_abs() < 1e-15));
        assert!(out.d_hidden.iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn zero_weights_zero_gradients() {
        let mut rng = Pcg32::seed_from_u64(4);
        let head = HeadParams::init(HeadArch::Hierarchical, Feedback::Logits, 4, [2, 3, 4], &mut rng);
        let targets = random_targets(&mut rng, [2, 3, 4]);
        let out = head.backward(&[1.0, 2.0, 3.0, 4.0], &targets, &LossWeights::uniform([2, 3, 4]).scaled(0.0)).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.grads.iter().all(|g| g.max_abs() == 0.0));
    }

    #[test]
    fn weight_scaling_scales_loss_and_gradients() {
        let mut rng = Pcg32::seed_from_u64(8);
        let head = HeadParams::init(HeadArch::Hierarchical, Feedback::Logits, 4, [2, 3, 4], &mut rng);
        let targets = random_targets(&mut rng, [2, 3, 4]);
        let h = [0.5, -0.5, 0.25, 1.0];
        let base = LossWeights { w2: vec![0.5, 1.0], w3: vec![1.0, 0.25, 1.0], w4: vec![1.0, 1.0, 0.5, 0.75] };
        let a = head.backward(&h, &targets, &base).unwrap();
        let b = head.backward(&h, &targets, &base.scaled(3.0)).unwrap();
        assert!((b.loss - 3.0 * a.loss).abs() < 1e-12);
        for (ga, gb) in a.grads.iter().zip(&b.grads) {
            let (da, db) = (ga.to_dense(0), gb.to_dense(0));
            for (x, y) in da.iter().zip(&db) {
                assert!((y - 3.0 * x).abs() < 1e-12);
            }
        }
        // predictions do not depend on loss weights at all
        assert_eq!(a.logits, b.logits);
    }
}
