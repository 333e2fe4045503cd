use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::micro_f1;
use super::synth::{Dataset, LabeledInstance};
use crate::losses::LossKind;
use crate::simplex::{ProbabilityVector, ScoreVector};
use crate::{Error, Result};

/// Scores `z = W x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// One row per label.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(num_labels: usize, num_features: usize) -> Self {
        Self {
            weights: vec![vec![0.0; num_features]; num_labels],
            bias: vec![0.0; num_labels],
        }
    }

    pub fn num_labels(&self) -> usize {
        self.bias.len()
    }

    pub fn num_features(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn scores(&self, x: &[f64]) -> Result<ScoreVector> {
        if x.len() != self.num_features() {
            return Err(Error::LengthMismatch(x.len(), self.num_features()));
        }
        let z = self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect::<Vec<_>>();
        ScoreVector::new(z)
    }

    fn is_finite(&self) -> bool {
        self.bias
            .iter()
            .chain(self.weights.iter().flatten())
            .all(|v| v.is_finite())
    }
}

/// Training hyperparameters for one activation-loss arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Prediction threshold for the softmax arm.
    pub p0: f64,
    /// If non-empty, the softmax threshold is tuned over these values on the
    /// validation split instead of using `p0`.
    #[serde(default)]
    pub p0_grid: Vec<f64>,
}

impl TrainConfig {
    pub fn new(loss: LossKind) -> Self {
        Self {
            loss,
            epochs: 50,
            batch_size: 32,
            learning_rate: 0.1,
            seed: 0,
            p0: 0.5,
            p0_grid: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidStep(self.learning_rate));
        }
        for &p in std::iter::once(&self.p0).chain(&self.p0_grid) {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "p0 must be in (0, 1), got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Result of [`train`]: the parameters from the epoch with the best
/// validation micro-F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    #[serde(flatten)]
    pub model: LinearModel,
    pub config: TrainConfig,
    /// Threshold used at prediction time (softmax arm only).
    pub p0: f64,
    /// 0 when no epoch ran.
    pub best_epoch: usize,
    pub val_micro_f1: f64,
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Predicted label set and the probability vector it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    pub probs: ProbabilityVector,
}

/// Sparse arms predict the support of their activation; the softmax arm
/// predicts the labels with probability above `p0`.
pub fn predict(model: &LinearModel, x: &[f64], loss: &LossKind, p0: f64) -> Result<Prediction> {
    let z = model.scores(x)?;
    let probs = loss.activation()?.apply(&z)?;
    let labels = if loss.is_sparse() {
        probs.support().to_vec()
    } else {
        probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > p0)
            .map(|(i, _)| i)
            .collect()
    };
    Ok(Prediction { labels, probs })
}

fn validation_f1(
    model: &LinearModel,
    instances: &[LabeledInstance],
    loss: &LossKind,
    p0: f64,
) -> Result<f64> {
    let truths: Vec<_> = instances.iter().map(|i| i.on_set().to_vec()).collect();
    let preds = instances
        .iter()
        .map(|i| predict(model, i.x(), loss, p0).map(|p| p.labels))
        .collect::<Result<Vec<_>>>()?;
    micro_f1(&preds, &truths)
}

/// Best validation F1 and the threshold achieving it.
fn select_threshold(
    model: &LinearModel,
    instances: &[LabeledInstance],
    config: &TrainConfig,
) -> Result<(f64, f64)> {
    if config.loss.is_sparse() || config.p0_grid.is_empty() {
        return Ok((
            validation_f1(model, instances, &config.loss, config.p0)?,
            config.p0,
        ));
    }
    let mut best = (f64::NEG_INFINITY, config.p0_grid[0]);
    for &p0 in &config.p0_grid {
        let f1 = validation_f1(model, instances, &config.loss, p0)?;
        if f1 > best.0 {
            best = (f1, p0);
        }
    }
    Ok(best)
}

/// Minibatch subgradient descent from a zero initialization. After each
/// epoch the model is scored on the validation split (the training split if
/// validation is empty) and the best epoch is kept.
pub fn train(data: &Dataset, config: &TrainConfig) -> Result<TrainedModel> {
    config.validate()?;
    data.validate()?;
    if data.train.is_empty() {
        return Err(Error::InvalidConfig("training split is empty".into()));
    }
    let d = data.num_features().unwrap_or(0);
    let k = data.num_labels().unwrap_or(0);
    let val = if data.val.is_empty() {
        &data.train
    } else {
        &data.val
    };

    let mut model = LinearModel::zeros(k, d);
    let (f1, p0) = select_threshold(&model, val, config)?;
    let mut best = TrainedModel {
        model: model.clone(),
        config: config.clone(),
        p0,
        best_epoch: 0,
        val_micro_f1: f1,
        epoch_losses: Vec::new(),
    };
    if config.epochs == 0 {
        return Ok(best);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut best_f1 = f64::NEG_INFINITY;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grad_w = vec![vec![0.0; d]; k];
            let mut grad_b = vec![0.0; k];
            for &idx in batch {
                let inst = &data.train[idx];
                let z = model.scores(inst.x()).map_err(|e| Error::Diverged {
                    epoch,
                    reason: e.to_string(),
                })?;
                total += config.loss.loss(&z, inst.eta())?;
                let g = config.loss.subgradient(&z, inst.eta())?;
                for ((row, gb), gi) in grad_w.iter_mut().zip(&mut grad_b).zip(g.iter()) {
                    if *gi == 0.0 {
                        continue;
                    }
                    *gb += gi;
                    for (w, xj) in row.iter_mut().zip(inst.x()) {
                        *w += gi * xj;
                    }
                }
            }
            let step = config.learning_rate / batch.len() as f64;
            for ((row, b), (grow, gb)) in model
                .weights
                .iter_mut()
                .zip(&mut model.bias)
                .zip(grad_w.iter().zip(&grad_b))
            {
                *b -= step * gb;
                for (w, g) in row.iter_mut().zip(grow) {
                    *w -= step * g;
                }
            }
        }
        let mean_loss = total / data.train.len() as f64;
        if !mean_loss.is_finite() || !model.is_finite() {
            return Err(Error::Diverged {
                epoch,
                reason: "non-finite loss or parameters".into(),
            });
        }
        epoch_losses.push(mean_loss);
        let (f1, p0) = select_threshold(&model, val, config)?;
        if f1 > best_f1 {
            best_f1 = f1;
            best.model = model.clone();
            best.p0 = p0;
            best.best_epoch = epoch;
            best.val_micro_f1 = f1;
        }
    }
    best.epoch_losses = epoch_losses;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        let a = LabeledInstance::new(vec![1.0, 0.0], &[1, 0]).unwrap();
        let b = LabeledInstance::new(vec![0.0, 1.0], &[0, 1]).unwrap();
        Dataset {
            train: vec![a.clone(), b.clone()],
            val: vec![a.clone(), b.clone()],
            test: vec![a, b],
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let mut cfg = TrainConfig::new(LossKind::SparsemaxHinge);
        cfg.epochs = 0;
        let out = train(&toy(), &cfg).unwrap();
        assert_eq!(out.model, LinearModel::zeros(2, 2));
        assert_eq!(out.best_epoch, 0);
        assert!(out.epoch_losses.is_empty());
    }

    #[test]
    fn diverges_with_huge_step() {
        let a = LabeledInstance::new(vec![1.0, 0.0], &[1, 0, 0]).unwrap();
        let b = LabeledInstance::new(vec![1.0, 0.0], &[0, 1, 1]).unwrap();
        let data = Dataset {
            train: vec![a.clone(), b.clone(), b],
            val: vec![a],
            test: vec![],
        };
        let mut cfg = TrainConfig::new(LossKind::SparsehgHinge { q: 0.01 });
        cfg.learning_rate = 1e308;
        cfg.batch_size = 1;
        cfg.epochs = 50;
        let err = train(&data, &cfg).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = TrainConfig::new(LossKind::SoftmaxLog);
        cfg.batch_size = 0;
        assert!(train(&toy(), &cfg).is_err());
        let mut cfg = TrainConfig::new(LossKind::SoftmaxLog);
        cfg.p0_grid = vec![0.5, 1.0];
        assert!(train(&toy(), &cfg).is_err());
    }

    #[test]
    fn softmax_threshold_prediction() {
        let model = LinearModel {
            weights: vec![vec![2.0], vec![0.0], vec![0.0]],
            bias: vec![0.0; 3],
        };
        let p = predict(&model, &[1.0], &LossKind::SoftmaxLog, 0.5).unwrap();
        assert_eq!(p.labels, vec![0]);
        assert_eq!(p.probs.support_size(), 3);
        let p = predict(&model, &[1.0], &LossKind::SoftmaxLog, 0.9).unwrap();
        assert!(p.labels.is_empty());
    }

    #[test]
    fn serde_roundtrip() {
        let mut cfg = TrainConfig::new(LossKind::SparsehgHinge { q: 1.0 });
        cfg.epochs = 3;
        let out = train(&toy(), &cfg).unwrap();
        let json = serde_json::to_string(&out).unwrap();
        assert!(json.starts_with(r#"{"weights":"#));
        assert_eq!(serde_json::from_str::<TrainedModel>(&json).unwrap(), out);
    }
}
