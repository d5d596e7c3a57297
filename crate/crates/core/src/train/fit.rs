use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::backprop::batch_gradients;
use crate::error::{Error, Result};
use crate::model::{image_tensor, Model, Tensor};
use crate::scalogram::{augment, AugmentParams, ScalogramImage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Drives the split and the per-epoch shuffle.
    pub seed: u64,
    pub augment: AugmentParams,
    pub val_fraction: f64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 32,
            seed: 0,
            augment: AugmentParams::default(),
            val_fraction: 0.2,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidParam("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidParam("batch size must be >= 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::InvalidParam("validation fraction must be in (0, 1)".into()));
        }
        self.augment.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Accuracy on the augmented training batches, measured before each update.
    pub train_acc: f64,
    pub val_acc: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_acc,val_acc,loss\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_acc, e.val_acc, e.loss));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: TrainHistory,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const SPLIT_STREAM: u64 = 1 << 32;

/// Per-class random split; every class keeps at least one example on each side.
pub fn stratified_split(labels: &[usize], val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = seeded(seed, SPLIT_STREAM);
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut rng);
        let n_val = ((idx.len() as f64 * val_fraction).round() as usize).clamp(1, idx.len().max(2) - 1);
        val.extend_from_slice(&idx[..n_val.min(idx.len())]);
        train.extend_from_slice(&idx[n_val.min(idx.len())..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

pub(crate) fn labels_of(images: &[ScalogramImage]) -> Result<Vec<usize>> {
    images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            img.label
                .map(|c| c.index())
                .ok_or_else(|| Error::Dataset(format!("image {i} is unlabeled")))
        })
        .collect()
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// Fraction of `images[indices]` the model classifies correctly.
pub fn accuracy_on(model: &Model, images: &[ScalogramImage], indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let hits: Vec<Result<bool>> = indices
        .par_iter()
        .map(|&i| {
            let p = model.predict_image(&images[i])?;
            Ok(images[i].label.map(|c| c.index()) == Some(argmax(&p)))
        })
        .collect();
    let mut correct = 0;
    for h in hits {
        correct += h? as usize;
    }
    Ok(correct as f64 / indices.len() as f64)
}

/// Trains `model` with Adam on augmented mini-batches.
///
/// Fully deterministic given `cfg.seed` and `cfg.augment.seed`.
pub fn train(model: Model, images: &[ScalogramImage], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let labels = labels_of(images)?;
    for c in 0..model.num_classes() {
        let n = labels.iter().filter(|&&l| l == c).count();
        if n < 2 {
            return Err(Error::Dataset(format!("class {c} has {n} examples")));
        }
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= model.num_classes()) {
        return Err(Error::LabelOutOfRange {
            label: l,
            classes: model.num_classes(),
        });
    }

    let (train_idx, val_idx) = stratified_split(&labels, cfg.val_fraction, cfg.seed);
    let mut model = model;
    let mut adam = AdamState::new(cfg.adam, model.params().iter().map(|p| p.len()));
    let mut history = TrainHistory::default();
    let mut draw_index: u64 = 0;

    for epoch in 0..cfg.epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut seeded(cfg.seed, epoch as u64));

        let mut loss_sum = 0.0;
        let mut correct = 0;
        for batch in order.chunks(cfg.batch_size) {
            let inputs: Vec<Tensor> = batch
                .iter()
                .enumerate()
                .map(|(k, &i)| image_tensor(&augment(&images[i], &cfg.augment, draw_index + k as u64)))
                .collect();
            draw_index += batch.len() as u64;
            let refs: Vec<&Tensor> = inputs.iter().collect();
            let batch_labels: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let result = batch_gradients(&model, &refs, &batch_labels)?;
            loss_sum += result.loss_sum;
            correct += result.correct;
            adam_step(&mut model.params_mut(), &result.grads.tensors, &mut adam)?;
        }

        let n = order.len() as f64;
        history.epochs.push(EpochStats {
            epoch: epoch + 1,
            train_acc: correct as f64 / n,
            val_acc: accuracy_on(&model, images, &val_idx)?,
            loss: loss_sum / n,
        });
    }

    Ok(TrainOutcome {
        model,
        history,
        train_indices: train_idx,
        val_indices: val_idx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_stratified_and_disjoint() {
        let labels: Vec<usize> = (0..50).map(|i| (i % 5 == 0) as usize).collect();
        let (tr, va) = stratified_split(&labels, 0.2, 3);
        assert_eq!(tr.len() + va.len(), 50);
        assert!(tr.iter().all(|i| !va.contains(i)));
        assert_eq!(va.iter().filter(|&&i| labels[i] == 1).count(), 2);
        assert_eq!(va.iter().filter(|&&i| labels[i] == 0).count(), 8);
        assert_eq!(stratified_split(&labels, 0.2, 3), (tr, va));
    }

    #[test]
    fn split_keeps_one_each_side() {
        let labels = vec![0, 0, 1, 1];
        let (tr, va) = stratified_split(&labels, 0.9, 1);
        assert_eq!((tr.len(), va.len()), (2, 2));
    }

    #[test]
    fn history_csv() {
        let h = TrainHistory {
            epochs: vec![EpochStats {
                epoch: 1,
                train_acc: 0.5,
                val_acc: 0.75,
                loss: 0.25,
            }],
        };
        assert_eq!(h.to_csv(), "epoch,train_acc,val_acc,loss\n1,0.5,0.75,0.25\n");
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            val_fraction: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
