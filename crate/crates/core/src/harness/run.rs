use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{average_linkage, correlation_score, label_distances, tree_distances, CorrelationScore, HierarchyTree};
use crate::checkpoint::Checkpoint;
use crate::data::{self, batches, split, Dataset};
use crate::encoder::{Encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::harness::config::{DatasetSource, Method, RunConfig};
use crate::harness::metrics;
use crate::lwal::{compute_centroids, LabelTable, LwalTrainer, StdTrainer, TrainConfig, Trainer};
use crate::tensor::Tensor;

/// Split seed shared by every run so all methods and seeds see the same
/// train/test partition.
pub const SPLIT_SEED: u64 = 0;

/// Offset mixed into the run seed for the initial label table.
const TABLE_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub seed: u64,
    pub epoch: usize,
    pub train_loss: f64,
    pub test_acc: f64,
    /// Cumulative wall-clock time since the start of training.
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub seed: u64,
    pub epochs: Vec<EpochMetrics>,
    pub best_test_acc: f64,
    pub best_epoch: usize,
    pub auac: f64,
    pub class_names: Vec<String>,
    /// Final label vectors; for the one-hot baseline, class centroids of
    /// the final training-set encodings.
    pub labels: Vec<Vec<f64>>,
    pub hierarchy: Option<PathBuf>,
}

impl RunRecord {
    pub fn curve(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.test_acc).collect()
    }

    pub fn label_table(&self) -> Result<LabelTable> {
        LabelTable::from_vectors(Tensor::from_rows(&self.labels)?)
    }
}

/// Loads the configured data and returns `(train, test)`.
pub fn prepare_data(source: &DatasetSource, test_fraction: f64) -> Result<(Dataset, Dataset)> {
    match source {
        DatasetSource::Idx {
            images,
            labels,
            test,
            subset,
        } => {
            let mut full = data::load_idx(images, labels)?;
            if let Some(n) = subset {
                let idx: Vec<usize> = (0..full.len().min(*n)).collect();
                full = full.subset(&idx);
            }
            match test {
                Some((ti, tl)) => {
                    let mut t = data::load_idx(ti, tl)?;
                    let n = full.num_classes().max(t.num_classes());
                    let names: Vec<String> = (0..n).map(|c| c.to_string()).collect();
                    full.class_names = names.clone();
                    t.class_names = names;
                    Ok((full, t))
                }
                None => split(&full, test_fraction, SPLIT_SEED),
            }
        }
        DatasetSource::Csv { path, label_column } => split(&data::load_csv(path, label_column)?, test_fraction, SPLIT_SEED),
        DatasetSource::Synth(spec) => split(&data::gen_synthetic(spec)?.dataset, test_fraction, SPLIT_SEED),
    }
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len().max(1) as f64
}

/// Everything one seed produces.
#[derive(Clone, Debug)]
pub struct SeedOutcome {
    pub record: RunRecord,
    pub checkpoint: Checkpoint,
}

fn train_loop<T: Trainer>(
    trainer: &mut T,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<EpochMetrics>> {
    let started = Instant::now();
    let mut out = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut loss_sum = 0.0;
        let mut steps = 0usize;
        for (x, y) in batches(train, cfg.batch_size, seed, epoch) {
            loss_sum += trainer.train_step(&x, &y, epoch)?.loss;
            steps += 1;
        }
        let test_acc = accuracy(&trainer.predict(&test.features)?, &test.labels);
        out.push(EpochMetrics {
            seed,
            epoch,
            train_loss: loss_sum / steps as f64,
            test_acc,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(out)
}

/// Trains one seed of `cfg` on prepared data.
pub fn run_seed(cfg: &RunConfig, train: &Dataset, test: &Dataset, seed: u64) -> Result<SeedOutcome> {
    let n = train.num_classes();
    let enc_cfg = EncoderConfig {
        input_dim: train.input_dim(),
        hidden_layers: cfg.hidden_layers.clone(),
        latent_dim: cfg.dim_multiplier * n,
        head_l2: cfg.head_l2,
        init_seed: seed,
    };
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let encoder = Encoder::init(enc_cfg)?;
    let (epochs, encoder, table) = match cfg.method {
        Method::Std => {
            let mut t = StdTrainer::new(encoder, n, &train_cfg)?;
            let epochs = train_loop(&mut t, train, test, &train_cfg, seed)?;
            let encoder = t.into_encoder();
            let z = encoder.forward(&train.features)?;
            let mut table = LabelTable::uninitialized(n, encoder.latent_dim())?;
            for (c, v) in compute_centroids(&z, &train.labels, n)? {
                table.set(c, &v);
            }
            (epochs, encoder, table)
        }
        Method::Lwal | Method::LwalRpl => {
            let table = LabelTable::random(n, encoder.latent_dim(), seed ^ TABLE_SEED_SALT)?;
            let mut t = LwalTrainer::new(encoder, table, train_cfg.clone())?;
            let epochs = train_loop(&mut t, train, test, &train_cfg, seed)?;
            let (encoder, table) = t.into_parts();
            (epochs, encoder, table)
        }
    };
    if !table.is_initialized() {
        return Err(Error::Data("some class has no training samples".into()));
    }
    let curve: Vec<f64> = epochs.iter().map(|e| e.test_acc).collect();
    let record = RunRecord {
        method: cfg.method,
        seed,
        best_test_acc: metrics::best(&curve).expect("epochs >= 1"),
        best_epoch: metrics::best_epoch(&curve).expect("epochs >= 1"),
        auac: metrics::auac(&curve)?,
        epochs,
        class_names: train.class_names.clone(),
        labels: (0..n).map(|c| table.vector(c).to_vec()).collect(),
        hierarchy: cfg.hierarchy.clone(),
    };
    Ok(SeedOutcome {
        checkpoint: Checkpoint {
            encoder,
            labels: Some((table, train.class_names.clone())),
        },
        record,
    })
}

/// Runs every seed (in parallel, one thread each) and returns the outcomes
/// in seed-list order.
pub fn run_all(cfg: &RunConfig) -> Result<Vec<SeedOutcome>> {
    let (train, test) = prepare_data(&cfg.dataset, cfg.test_fraction)?;
    std::thread::scope(|s| {
        let handles: Vec<_> = cfg
            .seeds
            .iter()
            .map(|&seed| {
                let (train, test) = (&train, &test);
                s.spawn(move || run_seed(cfg, train, test, seed))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    })
}

/// Correlation score restricted to classes that appear as hierarchy leaves.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureScore {
    pub classes: Vec<String>,
    pub score: CorrelationScore,
}

pub fn structure_score(table: &LabelTable, class_names: &[String], tree: &HierarchyTree) -> Result<StructureScore> {
    let mapped = tree.mapped_classes(class_names);
    if mapped.len() < 3 {
        return Err(Error::Config(format!(
            "only {} classes map onto hierarchy leaves; at least 3 are needed",
            mapped.len()
        )));
    }
    let classes: Vec<String> = mapped.iter().map(|&i| class_names[i].clone()).collect();
    let reference = tree_distances(tree, &classes)?;
    let sub = LabelTable::from_vectors(table.vectors().select_rows(&mapped))?;
    let score = correlation_score(&label_distances(&sub), &reference)?;
    Ok(StructureScore { classes, score })
}

pub fn render_score(s: &StructureScore) -> String {
    let mut out = format!("correlation_score={}\n", s.score.mean);
    for (name, t) in s.classes.iter().zip(&s.score.per_class) {
        let _ = writeln!(out, "tau_b[{name}]={t}");
    }
    out
}

pub fn newick_for(table: &LabelTable, class_names: &[String]) -> Result<String> {
    Ok(average_linkage(&label_distances(table))?
        .with_leaf_names(class_names.iter().cloned())?
        .to_newick())
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub const RECORDS_FILE: &str = "records.json";
pub const METRICS_FILE: &str = "metrics.jsonl";

/// Executes a run configuration and writes its artifacts to `out_dir`:
/// `metrics.jsonl`, `records.json`, and per seed a checkpoint, a Newick
/// dendrogram of the final labels, and (with a hierarchy) a score file.
pub fn run(cfg: &RunConfig) -> Result<Vec<RunRecord>> {
    let mut cfg = cfg.clone();
    if let Some(h) = &cfg.hierarchy {
        // records outlive the working directory they were produced from
        cfg.hierarchy = Some(fs::canonicalize(h).map_err(|e| Error::io(h, e))?);
    }
    let cfg = &cfg;
    let tree = cfg.hierarchy.as_deref().map(HierarchyTree::load).transpose()?;
    let outcomes = run_all(cfg)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;

    let metrics_path = cfg.out_dir.join(METRICS_FILE);
    let mut metrics = fs::File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    for o in &outcomes {
        for e in &o.record.epochs {
            let line = serde_json::to_string(e).expect("plain struct serializes");
            writeln!(metrics, "{line}").map_err(|e| Error::io(&metrics_path, e))?;
        }
    }

    for (i, o) in outcomes.iter().enumerate() {
        let r = &o.record;
        // repeated seeds get distinct file names
        let tag = if cfg.seeds[..i].contains(&r.seed) {
            format!("seed{}_{i}", r.seed)
        } else {
            format!("seed{}", r.seed)
        };
        let table = r.label_table()?;
        o.checkpoint.save(&cfg.out_dir.join(format!("model_{tag}.bin")))?;
        write_file(&cfg.out_dir.join(format!("labels_{tag}.newick")), newick_for(&table, &r.class_names)? + "\n")?;
        if let Some(tree) = &tree {
            let s = structure_score(&table, &r.class_names, tree)?;
            write_file(&cfg.out_dir.join(format!("scores_{tag}.txt")), render_score(&s))?;
        }
    }
    let records: Vec<RunRecord> = outcomes.into_iter().map(|o| o.record).collect();
    let json = serde_json::to_string_pretty(&records).expect("records serialize");
    write_file(&cfg.out_dir.join(RECORDS_FILE), json + "\n")?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SynthSpec;

    fn small_cfg(method: Method) -> RunConfig {
        RunConfig {
            dataset: DatasetSource::Synth(SynthSpec {
                depth: 2,
                samples_per_class: 20,
                dim: 6,
                ..SynthSpec::default()
            }),
            method,
            dim_multiplier: if method == Method::Std { 1 } else { 3 },
            hidden_layers: vec![8],
            head_l2: 0.1,
            test_fraction: 0.25,
            train: TrainConfig {
                epochs: 3,
                batch_size: 16,
                learning_rate: 0.01,
                repel_weight: if method == Method::LwalRpl { 10.0 } else { 0.0 },
                ..TrainConfig::default()
            },
            seeds: vec![5],
            hierarchy: None,
            out_dir: PathBuf::from("unused"),
        }
    }

    #[test]
    fn records_are_deterministic_apart_from_wall_time() {
        for method in [Method::Std, Method::Lwal, Method::LwalRpl] {
            let cfg = small_cfg(method);
            let strip = |mut r: RunRecord| {
                r.epochs.iter_mut().for_each(|e| e.wall_ms = 0.0);
                r
            };
            let a = strip(run_all(&cfg).unwrap().remove(0).record);
            let b = strip(run_all(&cfg).unwrap().remove(0).record);
            assert_eq!(a, b);
            assert_eq!(a.epochs.len(), 3);
            assert!(a.auac <= a.best_test_acc);
            assert_eq!(a.labels.len(), 4);
        }
    }

    #[test]
    fn accuracy_counts_hits() {
        assert_eq!(accuracy(&[0, 1, 2, 2], &[0, 1, 1, 2]), 0.75);
    }
}
