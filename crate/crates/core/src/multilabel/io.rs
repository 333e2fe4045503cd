//! Dataset and model files.
//!
//! A dataset directory holds `train.jsonl`, `val.jsonl`, `test.jsonl` (one
//! `{"x": [...], "y": [...]}` object per line) and `manifest.json`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::synth::{Dataset, LabeledInstance, SynthConfig};
use crate::{Error, Result};

const SPLITS: [&str; 3] = ["train", "val", "test"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: Option<u64>,
    pub config: Option<SynthConfig>,
    pub num_features: usize,
    pub num_labels: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

pub fn write_jsonl<W: Write>(instances: &[LabeledInstance], writer: W) -> Result<()> {
    let mut out = BufWriter::new(writer);
    for inst in instances {
        serde_json::to_writer(&mut out, inst)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<LabeledInstance>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Writes the three splits and a manifest into `dir`, creating it if needed.
pub fn write_dataset(dir: &Path, data: &Dataset, config: Option<&SynthConfig>) -> Result<()> {
    data.validate()?;
    fs::create_dir_all(dir)?;
    let splits = [&data.train, &data.val, &data.test];
    for (name, split) in SPLITS.iter().zip(splits) {
        write_jsonl(split, File::create(dir.join(format!("{name}.jsonl")))?)?;
    }
    let manifest = Manifest {
        seed: config.map(|c| c.seed),
        config: config.cloned(),
        num_features: data.num_features().unwrap_or(0),
        num_labels: data.num_labels().unwrap_or(0),
        train: data.train.len(),
        val: data.val.len(),
        test: data.test.len(),
    };
    let mut file = BufWriter::new(File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut file, &manifest)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

pub fn read_split(dir: &Path, split: &str) -> Result<Vec<LabeledInstance>> {
    if !SPLITS.contains(&split) {
        return Err(Error::InvalidConfig(format!(
            "unknown split `{split}` (expected train, val or test)"
        )));
    }
    read_jsonl(BufReader::new(File::open(
        dir.join(format!("{split}.jsonl")),
    )?))
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let data = Dataset {
        train: read_split(dir, "train")?,
        val: read_split(dir, "val")?,
        test: read_split(dir, "test")?,
    };
    data.validate()?;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multilabel::{generate_synthetic, LabelCountLaw};

    #[test]
    fn dataset_roundtrip_is_byte_stable() {
        let cfg = SynthConfig {
            num_instances: 40,
            doc_length: 50,
            label_law: LabelCountLaw::UniformRange { radius: 3 },
            seed: 11,
            ..SynthConfig::default()
        };
        let data = generate_synthetic(&cfg).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_dataset(a.path(), &data, Some(&cfg)).unwrap();
        let back = read_dataset(a.path()).unwrap();
        assert_eq!(back, data);
        write_dataset(b.path(), &back, Some(&cfg)).unwrap();
        for name in ["train.jsonl", "val.jsonl", "test.jsonl", "manifest.json"] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap()
            );
        }
        assert!(read_split(a.path(), "holdout").is_err());
    }
}
