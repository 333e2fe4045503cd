use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::model::{predict, LinearModel};
use super::synth::LabeledInstance;
use crate::losses::LossKind;
use crate::simplex::ProbabilityVector;
use crate::{Error, Result};

/// Micro-averaged F1: `2TP / (2TP + FP + FN)` pooled over every
/// instance-label pair, 0 when nothing is predicted or true.
pub fn micro_f1(predictions: &[Vec<usize>], truths: &[Vec<usize>]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch(predictions.len(), truths.len()));
    }
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (pred, truth) in predictions.iter().zip(truths) {
        let pred: BTreeSet<_> = pred.iter().collect();
        let truth: BTreeSet<_> = truth.iter().collect();
        let hits = pred.intersection(&truth).count();
        tp += hits;
        fp += pred.len() - hits;
        fnn += truth.len() - hits;
    }
    let denom = 2 * tp + fp + fnn;
    Ok(if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    })
}

fn kl_to_mid(p: &[f64], mid: &[f64]) -> f64 {
    p.iter()
        .zip(mid)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, mi)| pi * (pi / mi).ln())
        .sum()
}

/// Jensen-Shannon divergence in nats, in `[0, ln 2]`.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    let mid: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let value = 0.5 * kl_to_mid(p, &mid) + 0.5 * kl_to_mid(q, &mid);
    Ok(value.clamp(0.0, std::f64::consts::LN_2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityStats {
    pub mean_support_size: f64,
    /// `histogram[s - 1]` counts outputs with support size `s`.
    pub histogram: Vec<usize>,
}

pub fn sparsity_stats(outputs: &[ProbabilityVector]) -> Result<SparsityStats> {
    let Some(first) = outputs.first() else {
        return Err(Error::InvalidConfig(
            "sparsity stats need at least one output".into(),
        ));
    };
    let k = first.len();
    let mut histogram = vec![0; k];
    let mut total = 0usize;
    for p in outputs {
        if p.len() != k {
            return Err(Error::LengthMismatch(p.len(), k));
        }
        let s = p.support_size();
        total += s;
        if s > 0 {
            histogram[s - 1] += 1;
        }
    }
    Ok(SparsityStats {
        mean_support_size: total as f64 / outputs.len() as f64,
        histogram,
    })
}

/// Test-set metrics for one trained arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro_f1: f64,
    pub mean_jsd: f64,
    pub mean_support_size: f64,
    pub support_histogram: Vec<usize>,
}

/// Predicts every instance with the activation paired to `loss` and scores
/// the result.
pub fn evaluate(
    model: &LinearModel,
    instances: &[LabeledInstance],
    loss: &LossKind,
    p0: f64,
) -> Result<EvalReport> {
    if instances.is_empty() {
        return Err(Error::InvalidConfig(
            "cannot evaluate on an empty split".into(),
        ));
    }
    let mut predicted = Vec::with_capacity(instances.len());
    let mut truths = Vec::with_capacity(instances.len());
    let mut outputs = Vec::with_capacity(instances.len());
    let mut jsd_total = 0.0;
    for inst in instances {
        let pred = predict(model, inst.x(), loss, p0)?;
        jsd_total += jsd(inst.eta().eta(), &pred.probs)?;
        predicted.push(pred.labels);
        truths.push(inst.on_set().to_vec());
        outputs.push(pred.probs);
    }
    let stats = sparsity_stats(&outputs)?;
    Ok(EvalReport {
        micro_f1: micro_f1(&predicted, &truths)?,
        mean_jsd: jsd_total / instances.len() as f64,
        mean_support_size: stats.mean_support_size,
        support_histogram: stats.histogram,
    })
}
