use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::SynthSpec;
use crate::encoder::DEFAULT_HEAD_L2;
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::lwal::{TrainConfig, DEFAULT_REPEL_WEIGHT};

pub const DEFAULT_SEEDS: [u64; 3] = [12, 123, 1234];
pub const DEFAULT_DIM_MULTIPLIER: usize = 10;
pub const DEFAULT_TEST_FRACTION: f64 = 0.25;
pub const DEFAULT_HIDDEN: [usize; 1] = [64];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// One-hot softmax cross-entropy.
    Std,
    /// Adaptive labels.
    Lwal,
    /// Adaptive labels with the repel term.
    LwalRpl,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Std => "std",
            Method::Lwal => "lwal",
            Method::LwalRpl => "lwal_rpl",
        }
    }

    pub fn is_adaptive(self) -> bool {
        !matches!(self, Method::Std)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "std" => Ok(Method::Std),
            "lwal" => Ok(Method::Lwal),
            "lwal_rpl" => Ok(Method::LwalRpl),
            other => Err(Error::Config(format!("unknown method {other:?} (std, lwal, lwal_rpl)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Idx {
        images: PathBuf,
        labels: PathBuf,
        /// Separate test files; when absent the data is split.
        test: Option<(PathBuf, PathBuf)>,
        /// Keep only the first `n` training rows.
        subset: Option<usize>,
    },
    Csv {
        path: PathBuf,
        label_column: String,
    },
    Synth(SynthSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub method: Method,
    pub dim_multiplier: usize,
    pub hidden_layers: Vec<usize>,
    pub head_l2: f64,
    pub test_fraction: f64,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub hierarchy: Option<PathBuf>,
    pub out_dir: PathBuf,
}

const KEYS: &[&str] = &[
    "dataset.kind",
    "dataset.path",
    "dataset.paths",
    "dataset.test_paths",
    "dataset.label_column",
    "dataset.subset",
    "method",
    "epochs",
    "batch_size",
    "learning_rate",
    "k",
    "w",
    "lambda",
    "dim_multiplier",
    "head_l2",
    "hidden",
    "test_fraction",
    "seeds",
    "hierarchy",
    "out_dir",
];

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn path_pair(base: &Path, v: &str, key: &str) -> Result<(PathBuf, PathBuf)> {
    let parts: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    match parts.as_slice() {
        [a, b] => Ok((resolve(base, a), resolve(base, b))),
        _ => Err(Error::Config(format!("{key} must be `images,labels`"))),
    }
}

impl RunConfig {
    /// Parses a config; relative paths are resolved against `base`.
    pub fn from_kv(kv: &KeyValues, base: &Path) -> Result<Self> {
        kv.check_keys(KEYS)?;
        let path_value = || {
            kv.get_str("dataset.path")
                .or_else(|| kv.get_str("dataset.paths"))
                .ok_or_else(|| Error::Config("missing dataset.path".into()))
        };
        let kind = kv.get_str("dataset.kind").ok_or_else(|| Error::Config("missing dataset.kind".into()))?;
        let dataset = match kind {
            "idx" => {
                let (images, labels) = path_pair(base, path_value()?, "dataset.paths")?;
                let test = kv
                    .get_str("dataset.test_paths")
                    .map(|v| path_pair(base, v, "dataset.test_paths"))
                    .transpose()?;
                DatasetSource::Idx {
                    images,
                    labels,
                    test,
                    subset: kv.get("dataset.subset")?,
                }
            }
            "csv" => DatasetSource::Csv {
                path: resolve(base, path_value()?),
                label_column: kv.get_str("dataset.label_column").unwrap_or("label").to_string(),
            },
            "synth" => DatasetSource::Synth(SynthSpec::load(&resolve(base, path_value()?))?),
            other => return Err(Error::Config(format!("unknown dataset.kind {other:?} (idx, csv, synth)"))),
        };

        let method: Method = kv.require("method")?;
        let dim_multiplier = match method {
            Method::Std => {
                match kv.get::<usize>("dim_multiplier")? {
                    Some(m) if m != 1 => {
                        return Err(Error::Config("method std uses latent dim = number of classes; dim_multiplier must be 1".into()))
                    }
                    _ => 1,
                }
            }
            _ => kv.get_or("dim_multiplier", DEFAULT_DIM_MULTIPLIER)?,
        };
        if dim_multiplier < 1 {
            return Err(Error::Config("dim_multiplier must be >= 1".into()));
        }
        let lambda: Option<f64> = kv.get("lambda")?;
        let repel_weight = match method {
            Method::LwalRpl => lambda.unwrap_or(DEFAULT_REPEL_WEIGHT),
            _ => match lambda {
                Some(l) if l != 0.0 => {
                    return Err(Error::Config(format!("lambda = {l} requires method lwal_rpl")))
                }
                _ => 0.0,
            },
        };

        let d = TrainConfig::default();
        let train = TrainConfig {
            update_frequency: kv.get_or("k", d.update_frequency)?,
            warmup_steps: kv.get_or("w", d.warmup_steps)?,
            repel_weight,
            epochs: kv.get_or("epochs", d.epochs)?,
            batch_size: kv.get_or("batch_size", d.batch_size)?,
            learning_rate: kv.get_or("learning_rate", d.learning_rate)?,
            beta1: d.beta1,
            beta2: d.beta2,
            seed: 0,
        };
        train.validate()?;

        let seeds = kv.get_list("seeds")?.unwrap_or_else(|| DEFAULT_SEEDS.to_vec());
        if seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        let test_fraction = kv.get_or("test_fraction", DEFAULT_TEST_FRACTION)?;
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::Config(format!("test_fraction must lie in (0, 1), got {test_fraction}")));
        }
        let hidden_layers = kv.get_list("hidden")?.unwrap_or_else(|| DEFAULT_HIDDEN.to_vec());
        let head_l2 = kv.get_or("head_l2", DEFAULT_HEAD_L2)?;
        let out_dir = resolve(base, kv.get_str("out_dir").ok_or_else(|| Error::Config("missing out_dir".into()))?);
        Ok(RunConfig {
            dataset,
            method,
            dim_multiplier,
            hidden_layers,
            head_l2,
            test_fraction,
            train,
            seeds,
            hierarchy: kv.get_str("hierarchy").map(|p| resolve(base, p)),
            out_dir,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        RunConfig::from_kv(&KeyValues::parse(&text)?, base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("s.spec"), "depth = 2\n").unwrap();
        RunConfig::from_kv(&KeyValues::parse(text)?, dir.path())
    }

    #[test]
    fn defaults() {
        let c = parse("dataset.kind = synth\ndataset.path = s.spec\nmethod = lwal_rpl\nout_dir = o\n").unwrap();
        assert_eq!(c.seeds, vec![12, 123, 1234]);
        assert_eq!(c.dim_multiplier, 10);
        assert_eq!(c.train.repel_weight, 10.0);
        assert_eq!((c.train.update_frequency, c.train.warmup_steps), (1, 0));
        assert_eq!(c.head_l2, 0.1);
        assert!(matches!(c.dataset, DatasetSource::Synth(ref s) if s.depth == 2));
    }

    #[test]
    fn std_forces_unit_multiplier() {
        let c = parse("dataset.kind = synth\ndataset.path = s.spec\nmethod = std\nout_dir = o\n").unwrap();
        assert_eq!(c.dim_multiplier, 1);
        assert!(parse("dataset.kind = synth\ndataset.path = s.spec\nmethod = std\ndim_multiplier = 10\nout_dir = o\n").is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let base = "dataset.kind = synth\ndataset.path = s.spec\nout_dir = o\n";
        assert!(matches!(parse(&format!("{base}method = lwal\nepochs = 0\n")), Err(Error::Config(_))));
        assert!(matches!(parse(&format!("{base}method = lwal\nk = 0\n")), Err(Error::Config(_))));
        assert!(matches!(parse(&format!("{base}method = lwal\nlambda = 3\n")), Err(Error::Config(_))));
        assert!(matches!(parse(&format!("{base}method = magic\n")), Err(Error::Config(_))));
        assert!(matches!(parse(&format!("{base}method = lwal\nbogus = 1\n")), Err(Error::Config(_))));
        assert!(matches!(parse(&format!("{base}method = lwal\nseeds = \n")), Err(Error::Config(_))));
    }

    #[test]
    fn idx_paths() {
        let c = parse("dataset.kind = idx\ndataset.paths = a, b\nmethod = lwal\nout_dir = /tmp/o\n").unwrap();
        match c.dataset {
            DatasetSource::Idx { images, labels, test, .. } => {
                assert!(images.ends_with("a") && labels.ends_with("b") && test.is_none());
            }
            _ => panic!("expected idx"),
        }
        assert_eq!(c.out_dir, PathBuf::from("/tmp/o"));
    }
}
