//! Mini-batch training with Adam and optional early stopping.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::adam::{AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::grad::Gradients;
use crate::loss::LossWeights;
use crate::metrics::Metrics;
use crate::model::{Input, Model};
use crate::predict::assign;
use crate::rng;
use crate::taxonomy::LevelTargets;

/// Maps a function over a slice, returning results in input order.
pub trait Executor {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        items.iter().map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Input,
    pub targets: LevelTargets,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Sigmoid threshold used when scoring held-out examples.
    pub threshold: f64,
    /// Stop after this many epochs without held-out F1 improvement and
    /// restore the best parameters. Needs a non-empty held-out set.
    pub patience: Option<usize>,
    /// PCG stream for epoch shuffling.
    pub shuffle_stream: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
            threshold: 0.5,
            patience: Some(10),
            shuffle_stream: rng::STREAM_SHUFFLE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        let a = &self.adam;
        if !(a.learning_rate >= 0.0 && a.learning_rate.is_finite()) || !(0.0..1.0).contains(&a.beta1)
            || !(0.0..1.0).contains(&a.beta2) || a.eps.is_nan() || a.eps <= 0.0
        {
            return Err(Error::InvalidConfig("Adam hyperparameters out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    pub holdout_loss: Option<f64>,
    pub holdout_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    /// Epoch whose parameters were kept, when early stopping was active.
    pub best_epoch: Option<usize>,
    pub steps: u64,
}

/// Mean loss and micro-F1 of thresholded predictions over `examples`.
pub fn evaluate<E: Executor>(
    model: &Model,
    examples: &[Example],
    weights: &LossWeights,
    threshold: f64,
    exec: &E,
) -> Result<(f64, Metrics)> {
    let per_example = exec.map(examples, |ex| -> Result<(f64, Metrics)> {
        let logits = model.forward(&ex.input)?;
        let loss = model.head.loss(&logits, &ex.targets, weights)?;
        let predicted = assign(logits.fine(), threshold).positions;
        let gold = ex.targets.active_outputs();
        let hit = predicted.iter().filter(|p| gold.contains(p)).count() as u64;
        let counts = Metrics::from_counts(hit, predicted.len() as u64 - hit, gold.len() as u64 - hit);
        Ok((loss, counts))
    });
    let mut total = 0.0;
    let mut metrics = Metrics::default();
    for r in per_example {
        let (loss, m) = r?;
        total += loss;
        metrics = metrics.merge(&m);
    }
    let mean = if examples.is_empty() { 0.0 } else { total / examples.len() as f64 };
    Ok((mean, metrics))
}

/// Batch gradient: per-example gradients reduced in example order, so the
/// result does not depend on how the executor schedules work.
pub fn batch_gradients<E: Executor>(
    model: &Model,
    batch: &[&Example],
    weights: &LossWeights,
    exec: &E,
) -> Result<(f64, Gradients)> {
    let results = exec.map(batch, |ex| model.gradients(&ex.input, &ex.targets, weights));
    let mut iter = results.into_iter();
    let (mut loss, mut grads) = iter.next().ok_or(Error::EmptyTrainingSet)??;
    for r in iter {
        let (l, g) = r?;
        loss += l;
        grads.add_assign(&g);
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    Ok((loss / n, grads))
}

pub fn train<E: Executor>(
    model: &mut Model,
    optimizer: &mut AdamState,
    train_set: &[Example],
    holdout: &[Example],
    weights: &LossWeights,
    config: &TrainConfig,
    exec: &E,
) -> Result<TrainReport> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let names = model.tensor_names();
    let mut shuffle_rng = rng::stream(config.seed, config.shuffle_stream);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut report = TrainReport::default();
    let early_stop = config.patience.filter(|_| !holdout.is_empty());
    let mut best: Option<(f64, usize, Model)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, grads) = batch_gradients(model, &batch, weights, exec)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite { tensor: "loss".into() });
            }
            epoch_loss += loss * batch.len() as f64;
            optimizer.step(&mut model.tensors_mut(), &names, &grads)?;
            report.steps += 1;
        }
        let mut entry = EpochReport {
            epoch,
            train_loss: epoch_loss / train_set.len() as f64,
            holdout_loss: None,
            holdout_f1: None,
        };
        if !holdout.is_empty() {
            let (loss, metrics) = evaluate(model, holdout, weights, config.threshold, exec)?;
            entry.holdout_loss = Some(loss);
            entry.holdout_f1 = Some(metrics.f1);
        }
        let f1 = entry.holdout_f1;
        report.epochs.push(entry);

        if let (Some(patience), Some(f1)) = (early_stop, f1) {
            let improved = best.as_ref().is_none_or(|(b, _, _)| f1 > *b);
            if improved {
                best = Some((f1, epoch, model.clone()));
            } else if epoch - best.as_ref().map_or(0, |b| b.1) >= patience {
                break;
            }
        }
    }
    if let Some((_, epoch, params)) = best {
        *model = params;
        report.best_epoch = Some(epoch);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::DocVector;
    use crate::head::{Feedback, HeadArch, HeadParams};
    use alloc::vec;

    fn toy() -> (Model, Vec<Example>) {
        let mut rng = rng::stream(3, rng::STREAM_INIT);
        let head = HeadParams::init(HeadArch::Hierarchical, Feedback::Logits, 2, [1, 1, 2], &mut rng);
        let model = Model::new(None, head).unwrap();
        let ex = |x: [f64; 2], which: usize| Example {
            input: Input::Vector(DocVector(x.to_vec())),
            targets: LevelTargets { y2: vec![1.0], y3: vec![1.0], y4: if which == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] } },
        };
        let data = vec![ex([1.0, 0.0], 0), ex([0.0, 1.0], 1), ex([0.9, 0.1], 0), ex([0.2, 0.8], 1)];
        (model, data)
    }

    #[test]
    fn learns_separable_toy() {
        let (mut model, data) = toy();
        let mut opt = AdamState::new(AdamConfig { learning_rate: 0.05, ..Default::default() }, &model.tensor_lens());
        let cfg = TrainConfig { epochs: 200, batch_size: 2, patience: None, ..Default::default() };
        let w = LossWeights::uniform([1, 1, 2]);
        let (before, _) = evaluate(&model, &data, &w, 0.5, &Sequential).unwrap();
        let report = train(&mut model, &mut opt, &data, &[], &w, &cfg, &Sequential).unwrap();
        let (after, metrics) = evaluate(&model, &data, &w, 0.5, &Sequential).unwrap();
        assert!(after < before);
        assert_eq!(metrics.f1, 1.0);
        assert_eq!(report.steps, 400);
    }

    #[test]
    fn zero_epochs_is_identity() {
        let (mut model, data) = toy();
        let before = model.clone();
        let mut opt = AdamState::new(AdamConfig::default(), &model.tensor_lens());
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        train(&mut model, &mut opt, &data, &data, &LossWeights::uniform([1, 1, 2]), &cfg, &Sequential).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn rejects_empty_and_bad_config() {
        let (mut model, data) = toy();
        let mut opt = AdamState::new(AdamConfig::default(), &model.tensor_lens());
        let w = LossWeights::uniform([1, 1, 2]);
        assert_eq!(
            train(&mut model, &mut opt, &[], &[], &w, &TrainConfig::default(), &Sequential).unwrap_err(),
            Error::EmptyTrainingSet
        );
        let cfg = TrainConfig { batch_size: 0, ..Default::default() };
        assert!(train(&mut model, &mut opt, &data, &[], &w, &cfg, &Sequential).is_err());
        let cfg = TrainConfig { threshold: 1.0, ..Default::default() };
        assert!(train(&mut model, &mut opt, &data, &[], &w, &cfg, &Sequential).is_err());
    }

    #[test]
    fn early_stopping_restores_best() {
        let (mut model, data) = toy();
        let mut opt = AdamState::new(AdamConfig { learning_rate: 0.05, ..Default::default() }, &model.tensor_lens());
        let cfg = TrainConfig { epochs: 500, batch_size: 4, patience: Some(3), ..Default::default() };
        let w = LossWeights::uniform([1, 1, 2]);
        let report = train(&mut model, &mut opt, &data, &data, &w, &cfg, &Sequential).unwrap();
        let best = report.best_epoch.unwrap();
        assert!(report.epochs.len() < 500);
        assert_eq!(report.epochs.len(), best + 3);
        let (_, m) = evaluate(&model, &data, &w, 0.5, &Sequential).unwrap();
        assert_eq!(Some(m.f1), report.epochs[best - 1].holdout_f1);
    }
}
