//! `sparsegen` command-line tool.
//!
//! Exit codes: 0 success, 1 check failure, 2 usage or parse error, 3 domain
//! error.

mod args;
mod fmt;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::{Deserialize, Serialize};
use sparsegen::bench::projection_bench;
use sparsegen::jacobian::gradcheck;
use sparsegen::losses::gradcheck_loss;
use sparsegen::multilabel::io::{read_dataset, read_split, write_dataset};
use sparsegen::multilabel::{
    evaluate, generate_synthetic, run_experiment, train, ExperimentConfig, LabelCountLaw,
    SplitFractions, Sweep, SynthConfig, TrainConfig, TrainedModel,
};
use sparsegen::{
    Error, HourglassParams, LossKind, MappingSpec, ScoreVector, Transform, TransformKind,
};

use args::{
    BenchArgs, Cli, Command, EvalArgs, ExperimentArgs, GradcheckArgs, GridArgs, MapArgs,
    MappingArgs, SynthArgs, TrainArgs,
};

enum Failure {
    Check(String),
    Usage(String),
    Domain(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Domain(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Check(m) | Failure::Usage(m) | Failure::Domain(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            e if e.is_domain() => Failure::Domain(e.to_string()),
            Error::InvalidConfig(_) => Failure::Domain(e.to_string()),
            Error::Diverged { .. } => Failure::Check(e.to_string()),
            e => Failure::Usage(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(msg.into()))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Outcome<Vec<T>> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Failure::Usage(format!("cannot parse `{s}` in {what}")))
        })
        .collect()
}

fn parse_transform(name: &str) -> Outcome<Transform> {
    [
        Transform::Identity,
        Transform::Exponential,
        Transform::Square,
        Transform::Logarithm,
    ]
    .into_iter()
    .find(|t| t.name() == name)
    .ok_or_else(|| Failure::Usage(format!("unknown transform `{name}`")))
}

fn mapping_spec(
    name: &str,
    lambda: Option<f64>,
    q: Option<f64>,
    temperature: Option<f64>,
    transform: Option<&str>,
) -> Outcome<Option<MappingSpec>> {
    let hourglass = || HourglassParams::new(q.unwrap_or(1.0));
    Ok(Some(match name {
        "softmax" => MappingSpec::Softmax {
            temperature: temperature.unwrap_or(1.0),
        },
        "spherical-softmax" => MappingSpec::SphericalSoftmax,
        "sum-normalization" => MappingSpec::SumNormalization,
        "hardmax" => MappingSpec::Hardmax,
        "sparsemax" => MappingSpec::Sparsemax,
        "sparsegen" => {
            let t = transform
                .map(parse_transform)
                .transpose()?
                .unwrap_or(Transform::Identity);
            MappingSpec::Sparsegen(TransformKind::new(t, lambda.unwrap_or(0.0))?)
        }
        "sparsegen-lin" => MappingSpec::SparsegenLin {
            lambda: lambda.unwrap_or(0.0),
        },
        "sparsecone" => MappingSpec::Sparsecone(hourglass()?),
        "sparsehourglass" => MappingSpec::Sparsehourglass(hourglass()?),
        "sum-normalization-pp" => MappingSpec::SumNormalizationPp,
        _ => return Ok(None),
    }))
}

fn mapping_from_args(a: &MappingArgs) -> Outcome<MappingSpec> {
    mapping_spec(
        &a.name,
        a.lambda,
        a.q,
        a.temperature,
        a.transform.as_deref(),
    )?
    .ok_or_else(|| Failure::Usage(format!("unknown mapping `{}`", a.name)))
}

fn loss_kind(name: &str, lambda: Option<f64>, q: Option<f64>) -> Outcome<Option<LossKind>> {
    let kind = match name {
        "sparsemax-hinge" => LossKind::SparsemaxHinge,
        "sparsemax-huber" => LossKind::SparsemaxHuber,
        "softmax-log" => LossKind::SoftmaxLog,
        "sparsehg-hinge" => LossKind::SparsehgHinge {
            q: q.unwrap_or(1.0),
        },
        "sparsegen-lin-hinge" => LossKind::SparsegenLinHinge {
            lambda: lambda.unwrap_or(0.0),
        },
        _ => return Ok(None),
    };
    kind.validate()?;
    Ok(Some(kind))
}

fn required_loss(name: &str, lambda: Option<f64>, q: Option<f64>) -> Outcome<LossKind> {
    loss_kind(name, lambda, q)?.ok_or_else(|| Failure::Usage(format!("unknown loss `{name}`")))
}

fn cmd_map(a: MapArgs) -> Outcome {
    let spec = mapping_from_args(&a.mapping)?;
    let z = ScoreVector::new(parse_list(&a.z, "--z")?)?;
    let p = spec.apply(&z)?;
    let support: Vec<String> = p.support().iter().map(|i| i.to_string()).collect();
    println!(
        "{{\"p\":[{}],\"support\":[{}]}}",
        fmt::float_list(&p),
        support.join(",")
    );
    Ok(())
}

fn axis(min: f64, max: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| min + (max - min) * i as f64 / (n - 1) as f64)
        .collect()
}

fn cmd_grid(a: GridArgs) -> Outcome {
    let spec = mapping_from_args(&a.mapping)?;
    if !(a.x_min < a.x_max && a.y_min < a.y_max) {
        return usage("grid ranges need min < max");
    }
    if a.resolution < 2 {
        return usage("grid resolution must be >= 2");
    }
    let mut out = BufWriter::new(File::create(&a.out)?);
    writeln!(out, "z1,z2,p1,sparse")?;
    for y in axis(a.y_min, a.y_max, a.resolution) {
        for x in axis(a.x_min, a.x_max, a.resolution) {
            let z = ScoreVector::new(vec![x, y])?;
            match spec.apply(&z) {
                Ok(p) => {
                    let sparse = u8::from(p.support_size() < 2);
                    writeln!(
                        out,
                        "{},{},{},{sparse}",
                        fmt::float(x),
                        fmt::float(y),
                        fmt::float(p[0])
                    )?;
                }
                Err(Error::Domain(_)) => writeln!(out, "{},{},,", fmt::float(x), fmt::float(y))?,
                Err(e) => return Err(e.into()),
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Outcome {
    let label_law = match (a.mu, a.range, a.poisson) {
        (_, Some(radius), _) => LabelCountLaw::UniformRange { radius },
        (_, _, Some(mean)) => LabelCountLaw::Poisson { mean },
        (mu, _, _) => LabelCountLaw::UniformAroundMean {
            mean: mu.unwrap_or(2),
        },
    };
    let split: Vec<f64> = parse_list(&a.split, "--split")?;
    let [train, val, test] = split[..] else {
        return usage("--split needs three fractions");
    };
    let config = SynthConfig {
        num_instances: a.num_instances,
        vocab_size: a.vocab_size,
        num_labels: a.num_labels,
        label_law,
        doc_length: a.doc_length,
        split: SplitFractions { train, val, test },
        dirichlet_alpha: a.alpha,
        seed: a.seed,
    };
    let data = generate_synthetic(&config)?;
    write_dataset(&a.out, &data, Some(&config))?;
    println!(
        "wrote {} train, {} val, {} test instances to {}",
        data.train.len(),
        data.val.len(),
        data.test.len(),
        a.out.display()
    );
    Ok(())
}

/// Model file: the trained model plus the dataset it was trained on.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    #[serde(flatten)]
    trained: TrainedModel,
    data: PathBuf,
}

fn cmd_train(a: TrainArgs) -> Outcome {
    let mut config = TrainConfig::new(required_loss(&a.loss, a.lambda, a.q)?);
    config.epochs = a.optim.epochs;
    config.batch_size = a.optim.batch_size;
    config.learning_rate = a.optim.lr;
    config.seed = a.seed;
    config.p0 = a.p0;
    if let Some(grid) = &a.p0_grid {
        config.p0_grid = parse_list(grid, "--p0-grid")?;
    }
    let data = read_dataset(&a.data)?;
    let trained = train(&data, &config)?;
    println!(
        "best_epoch={} val_micro_f1={}",
        trained.best_epoch,
        fmt::float(trained.val_micro_f1)
    );
    let file = ModelFile {
        trained,
        data: a.data,
    };
    let mut out = BufWriter::new(File::create(&a.out)?);
    serde_json::to_writer_pretty(&mut out, &file)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn check_split(split: &str) -> Outcome {
    if ["train", "val", "test"].contains(&split) {
        Ok(())
    } else {
        usage(format!(
            "unknown split `{split}` (expected train, val or test)"
        ))
    }
}

fn read_model(path: &Path) -> Outcome<ModelFile> {
    Ok(serde_json::from_reader(io::BufReader::new(File::open(
        path,
    )?))?)
}

fn cmd_eval(a: EvalArgs) -> Outcome {
    check_split(&a.split)?;
    let model = read_model(&a.model)?;
    let dir = a.data.unwrap_or(model.data);
    let instances = read_split(&dir, &a.split)?;
    let trained = &model.trained;
    let report = evaluate(&trained.model, &instances, &trained.config.loss, trained.p0)?;
    println!("loss,split,micro_f1,mean_jsd,mean_support");
    println!(
        "{},{},{},{},{}",
        trained.config.loss.name(),
        a.split,
        fmt::float(report.micro_f1),
        fmt::float(report.mean_jsd),
        fmt::float(report.mean_support_size)
    );
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Outcome {
    let values: Vec<usize> = parse_list(&a.values, "--values")?;
    let sweep = match a.setting.as_str() {
        "mean-labels" => Sweep::MeanLabels(values),
        "label-range" => Sweep::LabelRange(values),
        "doc-length" => Sweep::DocLength(values),
        other => return usage(format!("unknown setting `{other}`")),
    };
    let arms = a
        .arms
        .split(',')
        .map(|name| required_loss(name.trim(), None, None))
        .collect::<Outcome<Vec<_>>>()?;
    let mut config = ExperimentConfig {
        seeds: parse_list(&a.seeds, "--seeds")?,
        ..Default::default()
    };
    config.data.num_instances = a.num_instances;
    config.data.doc_length = a.doc_length;
    config.train.epochs = a.optim.epochs;
    config.train.batch_size = a.optim.batch_size;
    config.train.learning_rate = a.optim.lr;
    let rows = run_experiment(&sweep, &arms, &config)?;
    let mut out: Box<dyn Write> = match a.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    writeln!(
        out,
        "setting,arm,sweep_value,micro_f1,mean_jsd,mean_support"
    )?;
    for row in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.setting,
            row.arm,
            row.sweep_value,
            fmt::float(row.report.micro_f1),
            fmt::float(row.report.mean_jsd),
            fmt::float(row.report.mean_support_size)
        )?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Outcome {
    if a.repetitions == 0 {
        return usage("--repetitions must be >= 1");
    }
    let dims: Vec<usize> = parse_list(&a.dims, "--dims")?;
    if dims.is_empty() || dims.contains(&0) {
        return usage("--dims needs positive dimensions");
    }
    let rows = projection_bench(&dims, a.repetitions, a.seed)?;
    println!("dim,sort_median_s,pivot_median_s,pivot_over_sort,max_abs_diff");
    let mut mismatch = false;
    for row in &rows {
        println!(
            "{},{},{},{},{}",
            row.dim,
            fmt::float(row.sort_median.as_secs_f64()),
            fmt::float(row.pivot_median.as_secs_f64()),
            fmt::float(row.ratio()),
            fmt::float(row.max_abs_diff)
        );
        mismatch |= row.max_abs_diff > 1e-12;
    }
    if mismatch {
        return Err(Failure::Check(
            "pivot and sort projections disagree beyond 1e-12".into(),
        ));
    }
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs) -> Outcome {
    let report = if let Some(kind) = loss_kind(&a.target, a.lambda, a.q)? {
        gradcheck_loss(&kind, a.trials, a.seed, a.h, a.tol)?
    } else if let Some(spec) = mapping_spec(
        &a.target,
        a.lambda,
        a.q,
        a.temperature,
        a.transform.as_deref(),
    )? {
        gradcheck(&spec, a.trials, a.seed, a.h, a.tol)?
    } else {
        return usage(format!("unknown gradcheck target `{}`", a.target));
    };
    let passed = report.passed();
    println!(
        "target={} checked={} skipped={} max_deviation={} max_column_sum={} tolerance={} result={}",
        report.target,
        report.checked,
        report.skipped,
        fmt::float(report.max_deviation),
        fmt::float(report.max_column_sum),
        fmt::float(report.tolerance),
        if passed { "pass" } else { "fail" }
    );
    if passed {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "gradient check failed for {}",
            report.target
        )))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Map(a) => cmd_map(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
