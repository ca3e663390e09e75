//! Central finite-difference check of the model's analytic gradients.
//!
//! The numeric side only ever evaluates the forward loss.

use alloc::vec::Vec;

use rand::RngExt;

use crate::encoder::EncoderParams;
use crate::error::Result;
use crate::head::{Feedback, HeadArch, HeadParams};
use crate::loss::LossWeights;
use crate::model::{Input, Model};
use crate::rng;
use crate::taxonomy::LevelTargets;
use crate::tokenizer::TokenSequence;
use crate::train::{batch_gradients, Example, Sequential};

/// Smallest denominator of the relative error, so that entries whose
/// gradient is essentially zero are judged by absolute difference.
pub const DENOMINATOR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub entries: usize,
}

fn mean_loss(model: &Model, examples: &[Example], weights: &LossWeights) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        total += model.loss(&ex.input, &ex.targets, weights)?;
    }
    Ok(total / examples.len() as f64)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR)
}

/// Compares every parameter's analytic gradient of the mean loss against
/// `(J(θ + δ) - J(θ - δ)) / (2δ)`. Parameters are `f32`, so the step actually
/// taken after rounding is used as the denominator.
pub fn check_model(model: &Model, examples: &[Example], weights: &LossWeights, delta: f32) -> Result<GradCheckReport> {
    let refs: Vec<&Example> = examples.iter().collect();
    let (_, analytic) = batch_gradients(model, &refs, weights, &Sequential)?;
    let mut report = GradCheckReport { max_relative_error: 0.0, entries: 0 };
    let mut probe = model.clone();
    for (t, len) in model.tensor_lens().into_iter().enumerate() {
        for i in 0..len {
            let original = probe.tensors_mut()[t][i];
            let up = original + delta;
            let down = original - delta;
            probe.tensors_mut()[t][i] = up;
            let plus = mean_loss(&probe, examples, weights)?;
            probe.tensors_mut()[t][i] = down;
            let minus = mean_loss(&probe, examples, weights)?;
            probe.tensors_mut()[t][i] = original;
            let numeric = (plus - minus) / (f64::from(up) - f64::from(down));
            let err = relative_error(analytic.tensors[t].get(i), numeric);
            report.max_relative_error = report.max_relative_error.max(err);
            report.entries += 1;
        }
    }
    Ok(report)
}

/// Small random encoder + hierarchical head (levels 3/5/7) with random
/// inputs, targets and loss weights. Odd seeds use sigmoid feedback.
pub fn random_problem(seed: u64) -> Result<(Model, Vec<Example>, LossWeights)> {
    let mut rng = rng::stream(seed, rng::STREAM_GRADCHECK);
    let dims = [3, 5, 7];
    let (vocab, embed, hidden) = (64, 6, 8);
    let feedback = if seed % 2 == 1 { Feedback::Sigmoid } else { Feedback::Logits };
    let mut encoder = EncoderParams::init(vocab, embed, hidden, &mut rng)?;
    encoder.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5f32..0.5));
    let mut head = HeadParams::init(HeadArch::Hierarchical, feedback, hidden, dims, &mut rng);
    for layer in &mut head.layers {
        layer.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5f32..0.5));
    }
    let model = Model::new(Some(encoder), head)?;

    let mut examples = Vec::new();
    for _ in 0..3 {
        let len = rng.random_range(0..12usize);
        let ids: Vec<u32> = (0..len).map(|_| rng.random_range(2..vocab as u32)).collect();
        let mut bits = |n: usize| -> Vec<f64> { (0..n).map(|_| f64::from(rng.random_range(0u8..2))).collect() };
        let targets = LevelTargets { y2: bits(dims[0]), y3: bits(dims[1]), y4: bits(dims[2]) };
        examples.push(Example { input: Input::Tokens(TokenSequence::frame(ids, 16)?), targets });
    }
    let mut w = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(0.05..=1.0)).collect() };
    let weights = LossWeights { w2: w(dims[0]), w3: w(dims[1]), w4: w(dims[2]) };
    Ok((model, examples, weights))
}

/// Runs `check_model` on `random_problem(seed)` with `δ = 1e-4`.
pub fn random_check(seed: u64) -> Result<GradCheckReport> {
    let (model, examples, weights) = random_problem(seed)?;
    check_model(&model, &examples, &weights, 1e-4)
}
