//! Multilabel classification harness: synthetic bag-of-words data, a linear
//! model trained by minibatch subgradient descent on each activation-loss
//! pair, and evaluation (micro-F1, Jensen-Shannon divergence, sparsity).

mod experiment;
pub mod io;
mod metrics;
mod model;
mod synth;

pub use experiment::{run_experiment, write_report_csv, ExperimentConfig, ExperimentRow, Sweep};
pub use metrics::{evaluate, jsd, micro_f1, sparsity_stats, EvalReport, SparsityStats};
pub use model::{predict, train, LinearModel, Prediction, TrainConfig, TrainedModel};
pub use synth::{
    generate_synthetic, Dataset, LabelCountLaw, LabeledInstance, SplitFractions, SynthConfig,
};
