use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, EvalReport};
use super::model::{train, TrainConfig, TrainedModel};
use super::synth::{generate_synthetic, Dataset, LabelCountLaw, SynthConfig};
use crate::losses::LossKind;
use crate::{Error, Result};

/// Which dataset parameter is varied, and over which values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "setting", content = "values", rename_all = "snake_case")]
pub enum Sweep {
    /// Mean label count under the uniform-around-mean law.
    MeanLabels(Vec<usize>),
    /// Radius of the uniform label-count range around 5.
    LabelRange(Vec<usize>),
    /// Document length in words.
    DocLength(Vec<usize>),
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::MeanLabels(_) => "mean_labels",
            Sweep::LabelRange(_) => "label_range",
            Sweep::DocLength(_) => "doc_length",
        }
    }

    pub fn values(&self) -> &[usize] {
        match self {
            Sweep::MeanLabels(v) | Sweep::LabelRange(v) | Sweep::DocLength(v) => v,
        }
    }

    fn configure(&self, base: &SynthConfig, value: usize) -> SynthConfig {
        let mut cfg = base.clone();
        match self {
            Sweep::MeanLabels(_) => {
                cfg.label_law = LabelCountLaw::UniformAroundMean { mean: value }
            }
            Sweep::LabelRange(_) => cfg.label_law = LabelCountLaw::UniformRange { radius: value },
            Sweep::DocLength(_) => cfg.doc_length = value,
        }
        cfg
    }
}

/// Shared settings for a sweep. `train.loss` is overridden per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: SynthConfig,
    pub train: TrainConfig,
    pub q_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub p0_grid: Vec<f64>,
    /// Each seed generates a fresh dataset and training order; reported
    /// metrics are averaged over seeds.
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: SynthConfig::default(),
            train: TrainConfig::new(LossKind::SparsemaxHinge),
            q_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            lambda_grid: vec![0.0, 0.25, 0.5, 0.75],
            p0_grid: (1..=10).map(|i| i as f64 * 0.05).collect(),
            seeds: vec![0],
        }
    }
}

/// One (arm, sweep point) cell of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub setting: String,
    pub arm: String,
    pub sweep_value: usize,
    pub report: EvalReport,
    /// Loss chosen on validation for each seed.
    pub selected: Vec<LossKind>,
    /// Epoch the selected model came from, for each seed.
    pub best_epochs: Vec<usize>,
}

/// Candidate losses for an arm: hyperparameterized hinge losses expand over
/// their grid.
fn candidates(arm: &LossKind, config: &ExperimentConfig) -> Vec<LossKind> {
    match arm {
        LossKind::SparsehgHinge { .. } if !config.q_grid.is_empty() => config
            .q_grid
            .iter()
            .map(|&q| LossKind::SparsehgHinge { q })
            .collect(),
        LossKind::SparsegenLinHinge { .. } if !config.lambda_grid.is_empty() => config
            .lambda_grid
            .iter()
            .map(|&lambda| LossKind::SparsegenLinHinge { lambda })
            .collect(),
        other => vec![*other],
    }
}

fn tune(
    data: &Dataset,
    arm: &LossKind,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<TrainedModel> {
    let mut best: Option<TrainedModel> = None;
    for loss in candidates(arm, config) {
        let mut tc = config.train.clone();
        tc.loss = loss;
        tc.seed = seed;
        tc.p0_grid = config.p0_grid.clone();
        let trained = train(data, &tc)?;
        if best
            .as_ref()
            .is_none_or(|b| trained.val_micro_f1 > b.val_micro_f1)
        {
            best = Some(trained);
        }
    }
    best.ok_or_else(|| Error::InvalidConfig("arm has no candidates".into()))
}

fn average(reports: &[EvalReport]) -> EvalReport {
    let n = reports.len() as f64;
    let k = reports
        .iter()
        .map(|r| r.support_histogram.len())
        .max()
        .unwrap_or(0);
    let mut histogram = vec![0; k];
    for r in reports {
        for (h, c) in histogram.iter_mut().zip(&r.support_histogram) {
            *h += c;
        }
    }
    EvalReport {
        micro_f1: reports.iter().map(|r| r.micro_f1).sum::<f64>() / n,
        mean_jsd: reports.iter().map(|r| r.mean_jsd).sum::<f64>() / n,
        mean_support_size: reports.iter().map(|r| r.mean_support_size).sum::<f64>() / n,
        support_histogram: histogram,
    }
}

/// Trains and tests every arm at every sweep point. Hyperparameters (q, λ,
/// softmax threshold) are chosen by validation micro-F1; test metrics are
/// averaged over seeds.
pub fn run_experiment(
    sweep: &Sweep,
    arms: &[LossKind],
    config: &ExperimentConfig,
) -> Result<Vec<ExperimentRow>> {
    if arms.is_empty() || sweep.values().is_empty() || config.seeds.is_empty() {
        return Err(Error::InvalidConfig(
            "experiment needs at least one arm, sweep value and seed".into(),
        ));
    }
    let mut rows = Vec::new();
    for &value in sweep.values() {
        let mut per_arm: Vec<(Vec<EvalReport>, Vec<LossKind>, Vec<usize>)> =
            vec![Default::default(); arms.len()];
        for &seed in &config.seeds {
            let mut data_cfg = sweep.configure(&config.data, value);
            data_cfg.seed = seed;
            let data = generate_synthetic(&data_cfg)?;
            for (arm, slot) in arms.iter().zip(per_arm.iter_mut()) {
                let trained = tune(&data, arm, config, seed)?;
                let report =
                    evaluate(&trained.model, &data.test, &trained.config.loss, trained.p0)?;
                slot.0.push(report);
                slot.1.push(trained.config.loss);
                slot.2.push(trained.best_epoch);
            }
        }
        for (arm, (reports, selected, best_epochs)) in arms.iter().zip(per_arm) {
            rows.push(ExperimentRow {
                setting: sweep.name().to_string(),
                arm: arm.name().to_string(),
                sweep_value: value,
                report: average(&reports),
                selected,
                best_epochs,
            });
        }
    }
    Ok(rows)
}

/// Writes `setting,arm,sweep_value,micro_f1,mean_jsd,mean_support`.
pub fn write_report_csv<W: Write>(rows: &[ExperimentRow], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "setting",
        "arm",
        "sweep_value",
        "micro_f1",
        "mean_jsd",
        "mean_support",
    ])?;
    for row in rows {
        out.write_record([
            row.setting.clone(),
            row.arm.clone(),
            row.sweep_value.to_string(),
            row.report.micro_f1.to_string(),
            row.report.mean_jsd.to_string(),
            row.report.mean_support_size.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.data.num_instances = 120;
        cfg.data.doc_length = 100;
        cfg.train.epochs = 3;
        cfg.q_grid = vec![1.0];
        cfg.lambda_grid = vec![0.0, 0.5];
        cfg
    }

    #[test]
    fn rows_cover_arms_and_sweep() {
        let arms = [
            LossKind::SparsemaxHuber,
            LossKind::SparsegenLinHinge { lambda: 0.0 },
        ];
        let rows = run_experiment(&Sweep::LabelRange(vec![0, 2]), &arms, &tiny()).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].setting, "label_range");
        assert_eq!(rows[1].arm, "sparsegen-lin-hinge");
        let mut buf = Vec::new();
        write_report_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("setting,arm,sweep_value,micro_f1,mean_jsd,mean_support\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(run_experiment(
            &Sweep::DocLength(vec![]),
            &[LossKind::SparsemaxHuber],
            &tiny()
        )
        .is_err());
        assert!(run_experiment(&Sweep::DocLength(vec![10]), &[], &tiny()).is_err());
    }
}
