use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::losses::LabelDistribution;
use crate::{Error, Result};

/// How the number of labels per instance is drawn. Draws are clamped to
/// `[1, K]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum LabelCountLaw {
    /// Uniform over `{mean - 1, mean, mean + 1}`, `mean` in `2..=9`.
    UniformAroundMean {
        mean: usize,
    },
    /// Uniform over `{5 - radius, ..., 5 + radius}`, `radius` in `0..=4`.
    UniformRange {
        radius: usize,
    },
    Poisson {
        mean: f64,
    },
}

impl LabelCountLaw {
    fn validate(&self) -> Result<()> {
        match *self {
            LabelCountLaw::UniformAroundMean { mean } if !(2..=9).contains(&mean) => Err(
                Error::InvalidConfig(format!("mean label count must be in 2..=9, got {mean}")),
            ),
            LabelCountLaw::UniformRange { radius } if radius > 4 => Err(Error::InvalidConfig(
                format!("label count radius must be in 0..=4, got {radius}"),
            )),
            LabelCountLaw::Poisson { mean } if !(mean.is_finite() && mean > 0.0) => Err(
                Error::InvalidConfig(format!("poisson mean must be > 0, got {mean}")),
            ),
            _ => Ok(()),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, num_labels: usize) -> Result<usize> {
        let raw = match *self {
            LabelCountLaw::UniformAroundMean { mean } => rng.random_range(mean - 1..=mean + 1),
            LabelCountLaw::UniformRange { radius } => rng.random_range(5 - radius..=5 + radius),
            LabelCountLaw::Poisson { mean } => {
                let dist = Poisson::new(mean)
                    .map_err(|e| Error::InvalidConfig(format!("poisson: {e}")))?;
                dist.sample(rng) as usize
            }
        };
        Ok(raw.clamp(1, num_labels))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.5,
            val: 0.2,
            test: 0.3,
        }
    }
}

/// Synthetic dataset parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_instances: usize,
    pub vocab_size: usize,
    pub num_labels: usize,
    pub label_law: LabelCountLaw,
    /// Words drawn per document.
    pub doc_length: usize,
    pub split: SplitFractions,
    /// Concentration of the symmetric Dirichlet each label's word
    /// distribution is drawn from.
    pub dirichlet_alpha: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_instances: 5000,
            vocab_size: 10,
            num_labels: 10,
            label_law: LabelCountLaw::UniformAroundMean { mean: 2 },
            doc_length: 2000,
            split: SplitFractions::default(),
            dirichlet_alpha: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.num_instances == 0 {
            return bad("num_instances must be >= 1");
        }
        if self.vocab_size == 0 || self.num_labels == 0 {
            return bad("vocab_size and num_labels must be >= 1");
        }
        if self.doc_length == 0 {
            return bad("doc_length must be >= 1");
        }
        if !(self.dirichlet_alpha.is_finite() && self.dirichlet_alpha > 0.0) {
            return bad("dirichlet_alpha must be > 0");
        }
        let SplitFractions { train, val, test } = self.split;
        if [train, val, test]
            .iter()
            .any(|f| !(f.is_finite() && *f >= 0.0))
            || (train + val + test - 1.0).abs() > 1e-9
        {
            return bad("split fractions must be non-negative and sum to 1");
        }
        self.label_law.validate()
    }
}

/// One document: normalized word counts and its binary label vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Record", into = "Record")]
pub struct LabeledInstance {
    x: Vec<f64>,
    eta: LabelDistribution,
}

/// On-disk form of an instance.
#[derive(Serialize, Deserialize)]
struct Record {
    x: Vec<f64>,
    y: Vec<u8>,
}

impl TryFrom<Record> for LabeledInstance {
    type Error = Error;

    fn try_from(r: Record) -> Result<Self> {
        LabeledInstance::new(r.x, &r.y)
    }
}

impl From<LabeledInstance> for Record {
    fn from(inst: LabeledInstance) -> Self {
        Record {
            y: inst.eta.labels(),
            x: inst.x,
        }
    }
}

impl LabeledInstance {
    /// Features must be finite, non-negative and sum to 1; at least one label
    /// must be on.
    pub fn new(x: Vec<f64>, y: &[u8]) -> Result<Self> {
        if x.is_empty() || x.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain("features must be finite and non-negative"));
        }
        let total: f64 = x.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "features must sum to 1 (sum = {total})"
            )));
        }
        let eta = LabelDistribution::from_labels(y)?;
        Ok(Self { x, eta })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn eta(&self) -> &LabelDistribution {
        &self.eta
    }

    pub fn labels(&self) -> Vec<u8> {
        self.eta.labels()
    }

    pub fn on_set(&self) -> &[usize] {
        self.eta.on_set()
    }
}

/// Train/validation/test splits.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<LabeledInstance>,
    pub val: Vec<LabeledInstance>,
    pub test: Vec<LabeledInstance>,
}

impl Dataset {
    pub fn num_features(&self) -> Option<usize> {
        self.all().next().map(|i| i.x.len())
    }

    pub fn num_labels(&self) -> Option<usize> {
        self.all().next().map(|i| i.eta.len())
    }

    fn all(&self) -> impl Iterator<Item = &LabeledInstance> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }

    /// Checks that every instance has the same feature and label dimension.
    pub fn validate(&self) -> Result<()> {
        let (Some(d), Some(k)) = (self.num_features(), self.num_labels()) else {
            return Err(Error::InvalidConfig("dataset is empty".into()));
        };
        for inst in self.all() {
            if inst.x.len() != d {
                return Err(Error::LengthMismatch(inst.x.len(), d));
            }
            if inst.eta.len() != k {
                return Err(Error::LengthMismatch(inst.eta.len(), k));
            }
        }
        Ok(())
    }
}

fn dirichlet(rng: &mut ChaCha8Rng, alpha: f64, dim: usize) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::InvalidConfig(format!("gamma: {e}")))?;
    loop {
        let draws: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            return Ok(draws.into_iter().map(|g| g / total).collect());
        }
    }
}

/// Multinomial draw by sequential conditional binomials.
fn multinomial(rng: &mut ChaCha8Rng, trials: u64, probs: &[f64]) -> Result<Vec<u64>> {
    let mut counts = vec![0; probs.len()];
    let mut remaining = trials;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() {
            counts[i] = remaining;
            break;
        }
        let cond = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let c = Binomial::new(remaining, cond)
            .map_err(|e| Error::InvalidConfig(format!("binomial: {e}")))?
            .sample(rng);
        counts[i] = c;
        remaining -= c;
        mass -= p;
    }
    Ok(counts)
}

/// Generates a dataset: each label gets a word distribution drawn once from
/// a symmetric Dirichlet; each document draws its label count from the
/// configured law, samples that many distinct labels, then draws
/// `doc_length` words from the uniform mixture of their word distributions.
/// Deterministic in `config.seed`.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let k = config.num_labels;
    let v = config.vocab_size;
    let word_dists = (0..k)
        .map(|_| dirichlet(&mut rng, config.dirichlet_alpha, v))
        .collect::<Result<Vec<_>>>()?;

    let mut instances = Vec::with_capacity(config.num_instances);
    for _ in 0..config.num_instances {
        let n = config.label_law.draw(&mut rng, k)?;
        let labels = index::sample(&mut rng, k, n).into_vec();
        let mut mixture = vec![0.0; v];
        for &l in &labels {
            for (m, w) in mixture.iter_mut().zip(&word_dists[l]) {
                *m += w / n as f64;
            }
        }
        let counts = multinomial(&mut rng, config.doc_length as u64, &mixture)?;
        let x = counts
            .iter()
            .map(|&c| c as f64 / config.doc_length as f64)
            .collect();
        let mut y = vec![0u8; k];
        for l in labels {
            y[l] = 1;
        }
        instances.push(LabeledInstance::new(x, &y)?);
    }

    let m = config.num_instances;
    let n_train = ((m as f64) * config.split.train).round() as usize;
    let n_val = (((m as f64) * config.split.val).round() as usize).min(m - n_train);
    let test = instances.split_off(n_train + n_val);
    let val = instances.split_off(n_train);
    Ok(Dataset {
        train: instances,
        val,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(law: LabelCountLaw, seed: u64) -> SynthConfig {
        SynthConfig {
            num_instances: 300,
            doc_length: 200,
            label_law: law,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn range_zero_gives_five_labels() {
        let data =
            generate_synthetic(&small(LabelCountLaw::UniformRange { radius: 0 }, 1)).unwrap();
        assert!(data
            .train
            .iter()
            .chain(&data.test)
            .all(|i| i.on_set().len() == 5));
    }

    #[test]
    fn mean_law_stays_in_window() {
        let data =
            generate_synthetic(&small(LabelCountLaw::UniformAroundMean { mean: 2 }, 3)).unwrap();
        assert!(data
            .train
            .iter()
            .all(|i| (1..=3).contains(&i.on_set().len())));
    }

    #[test]
    fn poisson_counts_are_clamped() {
        let data = generate_synthetic(&small(LabelCountLaw::Poisson { mean: 5.0 }, 4)).unwrap();
        assert!(data
            .train
            .iter()
            .all(|i| (1..=10).contains(&i.on_set().len())));
    }

    #[test]
    fn split_sizes() {
        let data =
            generate_synthetic(&small(LabelCountLaw::UniformRange { radius: 2 }, 0)).unwrap();
        assert_eq!(
            (data.train.len(), data.val.len(), data.test.len()),
            (150, 60, 90)
        );
    }

    #[test]
    fn features_are_normalized_counts() {
        let data =
            generate_synthetic(&small(LabelCountLaw::UniformRange { radius: 1 }, 9)).unwrap();
        for inst in &data.train {
            assert!((inst.x().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for &v in inst.x() {
                assert!((v * 200.0 - (v * 200.0).round()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = small(LabelCountLaw::UniformRange { radius: 5 }, 0);
        assert!(generate_synthetic(&cfg).is_err());
        cfg.label_law = LabelCountLaw::UniformAroundMean { mean: 10 };
        assert!(generate_synthetic(&cfg).is_err());
        cfg.label_law = LabelCountLaw::UniformAroundMean { mean: 5 };
        cfg.split.train = 0.9;
        assert!(generate_synthetic(&cfg).is_err());
    }

    #[test]
    fn multinomial_conserves_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let counts = multinomial(&mut rng, 1000, &[0.2, 0.0, 0.5, 0.3]).unwrap();
        assert_eq!(counts.iter().sum::<u64>(), 1000);
        assert_eq!(counts[1], 0);
    }

    #[test]
    fn instance_json_shape() {
        let inst = LabeledInstance::new(vec![0.25, 0.75], &[0, 1, 1]).unwrap();
        let json = serde_json::to_string(&inst).unwrap();
        assert_eq!(json, r#"{"x":[0.25,0.75],"y":[0,1,1]}"#);
        assert_eq!(
            serde_json::from_str::<LabeledInstance>(&json).unwrap(),
            inst
        );
        assert!(serde_json::from_str::<LabeledInstance>(r#"{"x":[1.0],"y":[0,0]}"#).is_err());
    }
}
