//! Training with adaptive labels: each class is represented by the centroid
//! of its latent encodings, class probabilities come from a softmax over
//! negative distances to those centroids, and the centroids are refreshed on
//! a warmup/update-frequency schedule while the encoder is trained by Adam.
//!
//! The one-hot softmax cross-entropy trainer lives here too, since both share
//! the encoder, the optimizer, and the step log.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::optim::{Adam, AdamConfig};
use crate::tensor::{self, Tensor, NORM_FLOOR};

pub const DEFAULT_REPEL_WEIGHT: f64 = 10.0;

/// Minimum pairwise distance between freshly initialized label vectors.
const MIN_INIT_SEPARATION: f64 = 1e-3;

/// Learned label vectors, one row per class.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelTable {
    vectors: Tensor,
    initialized: Vec<bool>,
}

impl LabelTable {
    /// A table whose rows are all marked uninitialized.
    pub fn uninitialized(num_classes: usize, latent_dim: usize) -> Result<Self> {
        if num_classes == 0 || latent_dim == 0 {
            return Err(Error::Config("label table needs N >= 1 and d >= 1".into()));
        }
        Ok(LabelTable {
            vectors: Tensor::zeros(&[num_classes, latent_dim]),
            initialized: vec![false; num_classes],
        })
    }

    /// Seeded random unit vectors with pairwise distance above 1e-3.
    pub fn random(num_classes: usize, latent_dim: usize, seed: u64) -> Result<Self> {
        let mut table = LabelTable::uninitialized(num_classes, latent_dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        const MAX_DRAWS: usize = 1000;
        for c in 0..num_classes {
            let mut accepted = false;
            for _ in 0..MAX_DRAWS {
                let mut v: Vec<f64> = (0..latent_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = tensor::norm(&v);
                if !(n > NORM_FLOOR) {
                    continue;
                }
                v.iter_mut().for_each(|x| *x /= n);
                if (0..c).all(|j| tensor::euclidean(table.vectors.row(j), &v) > MIN_INIT_SEPARATION) {
                    table.set(c, &v);
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Err(Error::Config(format!(
                    "cannot place {num_classes} distinct unit vectors in {latent_dim} dimensions"
                )));
            }
        }
        Ok(table)
    }

    pub fn from_vectors(vectors: Tensor) -> Result<Self> {
        if !vectors.is_matrix() {
            return Err(Error::shape("label table", format!("{:?}", vectors.shape())));
        }
        if !vectors.all_finite() {
            return Err(Error::NonFinite("label table"));
        }
        let n = vectors.rows();
        Ok(LabelTable {
            vectors,
            initialized: vec![true; n],
        })
    }

    /// Standard basis vectors `e_0 … e_{N-1}` in `N` dimensions.
    pub fn one_hot(num_classes: usize) -> Result<Self> {
        let mut t = Tensor::zeros(&[num_classes, num_classes]);
        for c in 0..num_classes {
            t.row_mut(c)[c] = 1.0;
        }
        LabelTable::from_vectors(t)
    }

    pub fn num_classes(&self) -> usize {
        self.vectors.rows()
    }

    pub fn latent_dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn vectors(&self) -> &Tensor {
        &self.vectors
    }

    pub fn vector(&self, class: usize) -> &[f64] {
        self.vectors.row(class)
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized.iter().all(|&b| b)
    }

    pub fn is_class_initialized(&self, class: usize) -> bool {
        self.initialized[class]
    }

    pub fn set(&mut self, class: usize, v: &[f64]) {
        self.vectors.row_mut(class).copy_from_slice(v);
        self.initialized[class] = true;
    }

    fn require_initialized(&self, op: &'static str) -> Result<()> {
        if self.is_initialized() {
            Ok(())
        } else {
            Err(Error::Usage(format!("{op}: label table has uninitialized classes")))
        }
    }
}

fn check_labels(labels: &[usize], num_classes: usize) -> Result<()> {
    if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::Data(format!("label {bad} out of range for {num_classes} classes")));
    }
    Ok(())
}

/// Mean encoding of each class present in the batch, in class order.
/// Absent classes are omitted.
pub fn compute_centroids(z: &Tensor, labels: &[usize], num_classes: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    if z.rows() != labels.len() || labels.is_empty() {
        return Err(Error::shape(
            "compute_centroids",
            format!("{} rows vs {} labels", z.rows(), labels.len()),
        ));
    }
    check_labels(labels, num_classes)?;
    let d = z.cols();
    let mut sums = vec![vec![0.0; d]; num_classes];
    let mut counts = vec![0usize; num_classes];
    for (i, &y) in labels.iter().enumerate() {
        counts[y] += 1;
        for (s, v) in sums[y].iter_mut().zip(z.row(i)) {
            *s += v;
        }
    }
    Ok(sums
        .into_iter()
        .zip(counts)
        .enumerate()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(c, (mut s, n))| {
            s.iter_mut().for_each(|v| *v /= n as f64);
            (c, s)
        })
        .collect())
}

/// Softmax over negative smoothed distances from each encoding to each label.
pub fn lwal_probabilities(z: &Tensor, table: &LabelTable) -> Result<Tensor> {
    table.require_initialized("lwal_probabilities")?;
    let d = tensor::row_l2_distance(z, table.vectors())?;
    tensor::row_softmax(&tensor::scale(&d, -1.0)?)
}

/// Mean negative log-probability of the true class.
pub fn lwal_loss(p: &Tensor, labels: &[usize]) -> Result<f64> {
    if !p.is_matrix() || p.rows() != labels.len() || labels.is_empty() {
        return Err(Error::shape("lwal_loss", format!("{:?} vs {} labels", p.shape(), labels.len())));
    }
    check_labels(labels, p.cols())?;
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let q = p.get(i, y);
        if !(q > 0.0) {
            return Err(Error::domain("lwal_loss", format!("probability {q} for sample {i}")));
        }
        total -= q.ln();
    }
    Ok(total / labels.len() as f64)
}

/// Sum of cosine similarities over unordered cross-class pairs, plus the
/// number of rows skipped for having (near-)zero norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepelLoss {
    pub value: f64,
    pub skipped_rows: usize,
}

pub fn repel_loss(z: &Tensor, labels: &[usize]) -> Result<RepelLoss> {
    if z.rows() != labels.len() {
        return Err(Error::shape("repel_loss", format!("{} rows vs {} labels", z.rows(), labels.len())));
    }
    let ok: Vec<bool> = (0..z.rows()).map(|i| tensor::norm(z.row(i)) > NORM_FLOOR).collect();
    let mut value = 0.0;
    for i in 0..z.rows() {
        for j in i + 1..z.rows() {
            if labels[i] != labels[j] && ok[i] && ok[j] {
                value += tensor::cosine_sim(z.row(i), z.row(j))?;
            }
        }
    }
    Ok(RepelLoss {
        value,
        skipped_rows: ok.iter().filter(|&&b| !b).count(),
    })
}

/// Tape version of [`lwal_probabilities`] followed by [`lwal_loss`]. The
/// label vectors enter as constants, so no gradient reaches them.
pub fn lwal_loss_on_tape(tape: &mut Tape, z: Var, table: &LabelTable, labels: &[usize]) -> Result<Var> {
    table.require_initialized("lwal_loss")?;
    check_labels(labels, table.num_classes())?;
    let c = tape.constant(table.vectors().clone())?;
    let d = tape.row_l2_distance(z, c)?;
    let logits = tape.scale(d, -1.0)?;
    cross_entropy_on_tape(tape, logits, labels)
}

/// Mean cross-entropy of row-softmax(logits) against integer targets.
pub fn cross_entropy_on_tape(tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<Var> {
    let logp = tape.row_log_softmax(logits)?;
    let picked = tape.gather(logp, labels)?;
    let m = tape.mean(picked)?;
    tape.scale(m, -1.0)
}

/// Tape version of [`repel_loss`].
pub fn repel_loss_on_tape(tape: &mut Tape, z: Var, labels: &[usize]) -> Result<Var> {
    let zv = tape.value(z);
    let m = zv.rows();
    if m != labels.len() {
        return Err(Error::shape("repel_loss", format!("{m} rows vs {} labels", labels.len())));
    }
    let ok: Vec<bool> = (0..m).map(|i| tensor::norm(zv.row(i)) > NORM_FLOOR).collect();
    let mut mask = Tensor::zeros(&[m, m]);
    for i in 0..m {
        for j in i + 1..m {
            if labels[i] != labels[j] && ok[i] && ok[j] {
                mask.row_mut(i)[j] = 1.0;
            }
        }
    }
    let unit = tape.row_normalize(z)?;
    let unit_t = tape.transpose(unit)?;
    let gram = tape.matmul(unit, unit_t)?;
    let mask = tape.constant(mask)?;
    let cross = tape.mul(gram, mask)?;
    tape.sum(cross)
}

/// Index of the nearest label vector for each row of `z`; ties go to the
/// smaller class index.
pub fn nearest_labels(z: &Tensor, table: &LabelTable) -> Result<Vec<usize>> {
    table.require_initialized("predict")?;
    if z.cols() != table.latent_dim() {
        return Err(Error::shape("predict", format!("latent {} vs table {}", z.cols(), table.latent_dim())));
    }
    Ok((0..z.rows())
        .map(|i| {
            let zi = z.row(i);
            let mut best = (0, f64::INFINITY);
            for c in 0..table.num_classes() {
                let d: f64 = zi.iter().zip(table.vector(c)).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.1 {
                    best = (c, d);
                }
            }
            best.0
        })
        .collect())
}

/// Encodes `x` and assigns each row to its nearest label.
pub fn predict(encoder: &Encoder, table: &LabelTable, x: &Tensor) -> Result<Vec<usize>> {
    table.require_initialized("predict")?;
    nearest_labels(&encoder.forward(x)?, table)
}

/// Row-wise argmax, ties to the smaller index.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Whether step `step` (1-based) refreshes the label table: the first step
/// after warmup and every `k`-th step after that.
pub fn is_refresh_step(step: u64, update_frequency: u64, warmup_steps: u64) -> bool {
    step > warmup_steps && (step - warmup_steps - 1) % update_frequency == 0
}

/// Closed-form number of refreshes in the first `steps` steps.
pub fn expected_refreshes(steps: u64, update_frequency: u64, warmup_steps: u64) -> u64 {
    steps.saturating_sub(warmup_steps).div_ceil(update_frequency)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Steps between label refreshes (`k`).
    pub update_frequency: u64,
    /// Initial steps during which the label table stays frozen (`w`).
    pub warmup_steps: u64,
    /// Weight of the repel term on refresh steps; zero disables it.
    pub repel_weight: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            update_frequency: 1,
            warmup_steps: 0,
            repel_weight: 0.0,
            epochs: 10,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            seed: 12,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.update_frequency < 1 {
            return Err(Error::Config("update frequency k must be >= 1".into()));
        }
        if !(self.repel_weight >= 0.0 && self.repel_weight.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.repel_weight)));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }
}

/// Per-step record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u64,
    pub epoch: usize,
    /// Total objective that was differentiated.
    pub loss: f64,
    /// Distance-softmax loss for adaptive labels, softmax CE for one-hot.
    pub data_loss: f64,
    pub repel: f64,
    pub l2: f64,
    pub refreshed: bool,
    pub wall_ms: f64,
}

/// Shared interface of the two trainers.
pub trait Trainer {
    fn train_step(&mut self, x: &Tensor, labels: &[usize], epoch: usize) -> Result<StepLog>;
    fn predict(&self, x: &Tensor) -> Result<Vec<usize>>;
    fn encoder(&self) -> &Encoder;
    fn steps(&self) -> u64;
}

fn apply_gradients(
    encoder: &mut Encoder,
    adam: &mut Adam,
    mut grads: crate::autodiff::Gradients,
    vars: &[Var],
) -> Result<()> {
    let grads: Vec<Tensor> = vars
        .iter()
        .map(|&v| grads.take(v).ok_or_else(|| Error::Usage("missing parameter gradient".into())))
        .collect::<Result<_>>()?;
    if grads.iter().any(|g| !g.all_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    adam.step(&mut encoder.params_mut(), &grads);
    if !encoder.all_finite() {
        return Err(Error::NonFinite("parameter update"));
    }
    Ok(())
}

fn finite_loss(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("loss"))
    }
}

/// Encoder plus adaptive label table, trained with alternating updates.
#[derive(Clone, Debug)]
pub struct LwalTrainer {
    encoder: Encoder,
    table: LabelTable,
    cfg: TrainConfig,
    adam: Adam,
    step: u64,
    refreshes: u64,
}

impl LwalTrainer {
    pub fn new(encoder: Encoder, table: LabelTable, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if table.latent_dim() != encoder.latent_dim() {
            return Err(Error::Config(format!(
                "label dim {} differs from encoder latent dim {}",
                table.latent_dim(),
                encoder.latent_dim()
            )));
        }
        let adam = Adam::new(cfg.adam());
        Ok(LwalTrainer {
            encoder,
            table,
            cfg,
            adam,
            step: 0,
            refreshes: 0,
        })
    }

    pub fn table(&self) -> &LabelTable {
        &self.table
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn refreshes(&self) -> u64 {
        self.refreshes
    }

    pub fn into_parts(self) -> (Encoder, LabelTable) {
        (self.encoder, self.table)
    }
}

impl Trainer for LwalTrainer {
    fn train_step(&mut self, x: &Tensor, labels: &[usize], epoch: usize) -> Result<StepLog> {
        let started = Instant::now();
        check_labels(labels, self.table.num_classes())?;
        let step = self.step + 1;
        let refresh = is_refresh_step(step, self.cfg.update_frequency, self.cfg.warmup_steps);

        let mut tape = Tape::new();
        let vars = self.encoder.forward_on_tape(&mut tape, x)?;
        let z = vars.output;
        if refresh {
            for (c, centroid) in compute_centroids(tape.value(z), labels, self.table.num_classes())? {
                self.table.set(c, &centroid);
            }
            self.refreshes += 1;
        }
        let data = lwal_loss_on_tape(&mut tape, z, &self.table, labels)?;
        let mut total = data;
        let mut repel_value = 0.0;
        if refresh && self.cfg.repel_weight > 0.0 {
            let r = repel_loss_on_tape(&mut tape, z, labels)?;
            repel_value = tape.value(r).data()[0];
            let weighted = tape.scale(r, self.cfg.repel_weight)?;
            total = tape.add(total, weighted)?;
        }
        let l2 = self.encoder.l2_penalty_on_tape(&mut tape, Encoder::head_weight_var(&vars))?;
        let l2_value = tape.value(l2).data()[0];
        total = tape.add(total, l2)?;

        let data_value = tape.value(data).data()[0];
        let loss = finite_loss(tape.value(total).data()[0])?;
        let grads = tape.backward(total)?;
        apply_gradients(&mut self.encoder, &mut self.adam, grads, &vars.params)?;
        self.step = step;
        Ok(StepLog {
            step,
            epoch,
            loss,
            data_loss: data_value,
            repel: repel_value,
            l2: l2_value,
            refreshed: refresh,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }

    fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        predict(&self.encoder, &self.table, x)
    }

    fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    fn steps(&self) -> u64 {
        self.step
    }
}

/// One-hot softmax cross-entropy trainer; the encoder output is the logits.
#[derive(Clone, Debug)]
pub struct StdTrainer {
    encoder: Encoder,
    num_classes: usize,
    adam: Adam,
    step: u64,
}

impl StdTrainer {
    pub fn new(encoder: Encoder, num_classes: usize, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if encoder.latent_dim() != num_classes {
            return Err(Error::Config(format!(
                "one-hot training needs latent dim = number of classes ({} != {num_classes})",
                encoder.latent_dim()
            )));
        }
        Ok(StdTrainer {
            encoder,
            num_classes,
            adam: Adam::new(cfg.adam()),
            step: 0,
        })
    }

    pub fn into_encoder(self) -> Encoder {
        self.encoder
    }
}

impl Trainer for StdTrainer {
    fn train_step(&mut self, x: &Tensor, labels: &[usize], epoch: usize) -> Result<StepLog> {
        let started = Instant::now();
        check_labels(labels, self.num_classes)?;
        let mut tape = Tape::new();
        let vars = self.encoder.forward_on_tape(&mut tape, x)?;
        let ce = cross_entropy_on_tape(&mut tape, vars.output, labels)?;
        let l2 = self.encoder.l2_penalty_on_tape(&mut tape, Encoder::head_weight_var(&vars))?;
        let total = tape.add(ce, l2)?;
        let data_value = tape.value(ce).data()[0];
        let l2_value = tape.value(l2).data()[0];
        let loss = finite_loss(tape.value(total).data()[0])?;
        let grads = tape.backward(total)?;
        apply_gradients(&mut self.encoder, &mut self.adam, grads, &vars.params)?;
        self.step += 1;
        Ok(StepLog {
            step: self.step,
            epoch,
            loss,
            data_loss: data_value,
            repel: 0.0,
            l2: l2_value,
            refreshed: false,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }

    fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.encoder.forward(x)?))
    }

    fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    fn steps(&self) -> u64 {
        self.step
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{EncoderConfig, Linear};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn centroid_examples() {
        let z = Tensor::from_rows(&[[1.0, 3.0], [3.0, 5.0], [7.0, 7.0]]).unwrap();
        let c = compute_centroids(&z, &[0, 0, 2], 3).unwrap();
        assert_eq!(c, vec![(0, vec![2.0, 4.0]), (2, vec![7.0, 7.0])]);
        assert!(matches!(compute_centroids(&z, &[0, 3, 1], 3), Err(Error::Data(_))));
    }

    #[test]
    fn probabilities_examples() {
        let table = LabelTable::from_vectors(Tensor::from_rows(&[[0.0, 0.0], [4f64.ln(), 0.0]]).unwrap()).unwrap();
        let p = lwal_probabilities(&Tensor::from_rows(&[[0.0, 0.0]]).unwrap(), &table).unwrap();
        assert!(close(p.get(0, 0), 0.8, 1e-6) && close(p.get(0, 1), 0.2, 1e-6));

        let eq = LabelTable::from_vectors(Tensor::from_rows(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]]).unwrap()).unwrap();
        let p = lwal_probabilities(&Tensor::from_rows(&[[0.0, 0.0]]).unwrap(), &eq).unwrap();
        assert!(p.data().iter().all(|&v| close(v, 1.0 / 3.0, 1e-12)));

        let fresh = LabelTable::uninitialized(3, 2).unwrap();
        assert!(matches!(lwal_probabilities(&Tensor::zeros(&[1, 2]), &fresh), Err(Error::Usage(_))));
    }

    #[test]
    fn loss_examples() {
        let one = Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(lwal_loss(&one, &[0, 1]).unwrap(), 0.0);
        let uni = Tensor::filled(&[2, 4], 0.25);
        assert!(close(lwal_loss(&uni, &[3, 1]).unwrap(), 4f64.ln(), 1e-15));
        let p = Tensor::from_rows(&[[0.5, 0.5], [0.75, 0.25], [0.8, 0.2]]).unwrap();
        let want = -(0.5f64.ln() + 0.25f64.ln() + 0.8f64.ln()) / 3.0;
        assert!(close(lwal_loss(&p, &[0, 1, 0]).unwrap(), want, 1e-15));
        assert!(matches!(lwal_loss(&one, &[1, 0]), Err(Error::Domain { .. })));
    }

    #[test]
    fn repel_examples() {
        let z = Tensor::from_rows(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(repel_loss(&z, &[0, 0, 0]).unwrap().value, 0.0);
        let r = repel_loss(&z, &[0, 1, 1]).unwrap();
        assert!(close(r.value, 1.0, 1e-15));
        let ortho = Tensor::from_rows(&[[1.0, 0.0], [0.0, 3.0]]).unwrap();
        assert_eq!(repel_loss(&ortho, &[0, 1]).unwrap().value, 0.0);
        let degenerate = Tensor::from_rows(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        let r = repel_loss(&degenerate, &[0, 1, 0]).unwrap();
        assert_eq!(r.skipped_rows, 1);
        assert!(close(r.value, 0.5f64.sqrt(), 1e-15));
    }

    #[test]
    fn tape_repel_matches_plain() {
        let z = Tensor::from_rows(&[[0.3, -1.0, 2.0], [0.0, 0.0, 0.0], [1.0, 1.0, 0.5], [-0.2, 0.4, 0.1]]).unwrap();
        let labels = [0, 1, 1, 0];
        let mut t = Tape::new();
        let zv = t.param(z.clone()).unwrap();
        let r = repel_loss_on_tape(&mut t, zv, &labels).unwrap();
        assert!(close(t.value(r).data()[0], repel_loss(&z, &labels).unwrap().value, 1e-14));
    }

    #[test]
    fn prediction_and_ties() {
        let table = LabelTable::from_vectors(
            Tensor::from_rows(&[[5.0, 5.0], [1.0, 0.0], [2.0, 2.0], [-1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let z = Tensor::from_rows(&[[2.0, 2.0], [0.0, 0.0]]).unwrap();
        assert_eq!(nearest_labels(&z, &table).unwrap(), vec![2, 1]);
        assert_eq!(argmax_rows(&Tensor::from_rows(&[[1.0, 3.0, 3.0]]).unwrap()), vec![1]);
    }

    #[test]
    fn random_table_properties() {
        let a = LabelTable::random(5, 4, 3).unwrap();
        assert_eq!(a, LabelTable::random(5, 4, 3).unwrap());
        for c in 0..5 {
            assert!(close(tensor::norm(a.vector(c)), 1.0, 1e-12));
        }
        assert!(a.is_initialized());
        assert!(LabelTable::random(3, 1, 0).is_err());
    }

    #[test]
    fn schedule_closed_form() {
        assert!((1..=10).all(|i| is_refresh_step(i, 1, 0)));
        assert!(!(1..=3).any(|i| is_refresh_step(i, 1, 3)));
        assert!(is_refresh_step(4, 2, 3) && !is_refresh_step(5, 2, 3) && is_refresh_step(6, 2, 3));
        for k in 1..6 {
            for w in 0..6 {
                for t in 0..30 {
                    let n = (1..=t).filter(|&i| is_refresh_step(i, k, w)).count() as u64;
                    assert_eq!(n, expected_refreshes(t, k, w));
                }
            }
        }
    }

    #[test]
    fn std_requires_latent_equal_classes() {
        let e = Encoder::init(EncoderConfig::new(3, vec![], 4)).unwrap();
        assert!(matches!(StdTrainer::new(e, 3, &TrainConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn std_zero_head_loss_is_ln_n() {
        let layer = Linear { weight: Tensor::zeros(&[3, 4]), bias: Tensor::zeros(&[4]) };
        let e = Encoder::from_layers(0.1, vec![layer]).unwrap();
        let mut tr = StdTrainer::new(e, 4, &TrainConfig::default()).unwrap();
        let x = Tensor::from_rows(&[[1.0, 2.0, 3.0], [0.0, -1.0, 4.0]]).unwrap();
        let log = tr.train_step(&x, &[0, 3], 0).unwrap();
        assert!(close(log.loss, 4f64.ln(), 1e-12));
    }

    #[test]
    fn warmup_leaves_table_untouched() {
        let e = Encoder::init(EncoderConfig { init_seed: 1, ..EncoderConfig::new(3, vec![4], 6) }).unwrap();
        let table = LabelTable::random(2, 6, 9).unwrap();
        let cfg = TrainConfig { warmup_steps: 3, ..TrainConfig::default() };
        let mut tr = LwalTrainer::new(e, table.clone(), cfg).unwrap();
        let x = Tensor::from_rows(&[[1.0, 0.5, -0.5], [0.1, 0.2, 0.3], [-1.0, 2.0, 0.0]]).unwrap();
        for _ in 0..3 {
            assert!(!tr.train_step(&x, &[0, 1, 0], 0).unwrap().refreshed);
        }
        assert_eq!(tr.table(), &table);
        assert!(tr.train_step(&x, &[0, 1, 0], 0).unwrap().refreshed);
        assert_ne!(tr.table(), &table);
    }
}
