use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    /// Where the data came from, e.g. a file path or `synthetic`.
    pub provenance: String,
}

impl Dataset {
    pub fn new(features: Tensor, labels: Vec<usize>, class_names: Vec<String>, provenance: impl Into<String>) -> Result<Self> {
        if !features.is_matrix() || features.rows() != labels.len() {
            return Err(Error::Data(format!(
                "features {:?} do not match {} labels",
                features.shape(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_names.len()) {
            return Err(Error::Data(format!("label {bad} out of range for {} classes", class_names.len())));
        }
        if !features.all_finite() {
            return Err(Error::Data("non-finite feature value".into()));
        }
        Ok(Dataset {
            features,
            labels,
            class_names,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn input_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Stratified split: after a seeded shuffle, each class sends
/// `round(fraction × count)` of its samples (clamped to `1..count`) to test.
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    let counts = ds.class_counts();
    if let Some((c, &n)) = counts.iter().enumerate().find(|(_, &n)| n < 2) {
        return Err(Error::Data(format!(
            "class {:?} has {n} samples; splitting needs at least 2",
            ds.class_names[c]
        )));
    }
    let quota: Vec<usize> = counts
        .iter()
        .map(|&n| ((test_fraction * n as f64).round() as usize).clamp(1, n - 1))
        .collect();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut taken = vec![0; counts.len()];
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for i in order {
        let y = ds.labels[i];
        if taken[y] < quota[y] {
            taken[y] += 1;
            test.push(i);
        } else {
            train.push(i);
        }
    }
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Seed for the shuffle of a given epoch.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ epoch as u64
}

/// Mini-batches over one epoch in a shuffled order; the final short batch is
/// kept.
pub struct Batches<'a> {
    ds: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Iterator for Batches<'_> {
    type Item = (Tensor, Vec<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let idx = &self.order[self.pos..end];
        self.pos = end;
        Some((
            self.ds.features.select_rows(idx),
            idx.iter().map(|&i| self.ds.labels[i]).collect(),
        ))
    }
}

pub fn batches(ds: &Dataset, batch_size: usize, seed: u64, epoch: usize) -> Batches<'_> {
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed(seed, epoch)));
    Batches {
        ds,
        order,
        batch_size: batch_size.max(1),
        pos: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n_per_class: usize, classes: usize) -> Dataset {
        let m = n_per_class * classes;
        let features = Tensor::matrix(m, 1, (0..m).map(|i| i as f64).collect()).unwrap();
        let labels = (0..m).map(|i| i % classes).collect();
        let names = (0..classes).map(|c| format!("c{c}")).collect();
        Dataset::new(features, labels, names, "toy").unwrap()
    }

    #[test]
    fn half_split_is_balanced() {
        let ds = toy(5, 2);
        let (train, test) = split(&ds, 0.5, 1).unwrap();
        // round(0.5 * 5) = 3 per class
        assert_eq!(test.class_counts(), vec![3, 3]);
        assert_eq!(train.class_counts(), vec![2, 2]);
        let (train, test) = split(&toy(6, 2), 0.5, 1).unwrap();
        assert_eq!((train.class_counts(), test.class_counts()), (vec![3, 3], vec![3, 3]));
    }

    #[test]
    fn split_is_a_seeded_partition() {
        let ds = toy(7, 3);
        let (a_train, a_test) = split(&ds, 0.3, 42).unwrap();
        let (b_train, b_test) = split(&ds, 0.3, 42).unwrap();
        assert_eq!((&a_train, &a_test), (&b_train, &b_test));
        let mut all: Vec<f64> = a_train.features.data().iter().chain(a_test.features.data()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, ds.features.data().to_vec());
    }

    #[test]
    fn split_needs_two_per_class() {
        let ds = toy(1, 2);
        assert!(matches!(split(&ds, 0.5, 0), Err(Error::Data(_))));
        assert!(matches!(split(&toy(4, 2), 1.0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn batches_cover_epoch_once() {
        let ds = toy(10, 3);
        let got: Vec<_> = batches(&ds, 7, 5, 2).collect();
        assert_eq!(got.len(), 5);
        assert_eq!(got.last().unwrap().1.len(), 2);
        let mut seen: Vec<f64> = got.iter().flat_map(|(x, _)| x.data().to_vec()).collect();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, ds.features.data().to_vec());

        let again: Vec<_> = batches(&ds, 7, 5, 2).collect();
        assert_eq!(got, again);
        let other: Vec<_> = batches(&ds, 7, 5, 3).collect();
        assert_ne!(got, other);

        let whole: Vec<_> = batches(&ds, 1000, 5, 0).collect();
        assert_eq!(whole.len(), 1);
        assert_eq!(whole[0].1.len(), 30);
    }
}
