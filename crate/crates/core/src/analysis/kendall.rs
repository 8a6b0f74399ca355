//! Kendall's τ-b and the per-class rank agreement between learned label
//! geometry and a reference distance matrix.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::lwal::LabelTable;
use crate::tensor::{self, Tensor};

fn cmp(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).expect("finite inputs")
}

/// Sum of `t(t-1)/2` over runs of equal adjacent keys.
fn tie_pairs<T>(sorted: &[T], eq: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Stable merge sort on `v` returning the number of inversions removed.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall's τ-b with tie correction, by Knight's `O(n log n)` method.
///
/// Returns 0 when either input is constant, where the statistic is 0/0.
pub fn kendall_tau_b(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("kendall_tau_b", format!("{} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::shape("kendall_tau_b", "need at least two observations"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::domain("kendall_tau_b", "non-finite input"));
    }
    let n = a.len() as u64;
    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|x, y| cmp(x.0, y.0).then(cmp(x.1, y.1)));

    let n0 = n * (n - 1) / 2;
    let ties_a = tie_pairs(&pairs, |x, y| x.0 == y.0);
    let ties_joint = tie_pairs(&pairs, |x, y| x.0 == y.0 && x.1 == y.1);

    let mut bs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut scratch = Vec::with_capacity(bs.len());
    let swaps = merge_count(&mut bs, &mut scratch);
    let ties_b = tie_pairs(&bs, |x, y| x == y);

    if ties_a == n0 || ties_b == n0 {
        return Ok(0.0);
    }
    // concordant - discordant, from the pair partition identity
    let numer = n0 as i64 - ties_a as i64 - ties_b as i64 + ties_joint as i64 - 2 * swaps as i64;
    let denom = (((n0 - ties_a) * (n0 - ties_b)) as f64).sqrt();
    Ok(numer as f64 / denom)
}

/// Euclidean distances between label vectors, without smoothing.
pub fn label_distances(table: &LabelTable) -> Tensor {
    let n = table.num_classes();
    let mut out = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in i + 1..n {
            let d = tensor::euclidean(table.vector(i), table.vector(j));
            out.row_mut(i)[j] = d;
            out.row_mut(j)[i] = d;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationScore {
    pub mean: f64,
    pub per_class: Vec<f64>,
}

fn off_diagonal(m: &Tensor, i: usize) -> Vec<f64> {
    m.row(i)
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .collect()
}

/// Mean over classes of τ-b between each class's reference distances and
/// learned distances to every other class.
pub fn correlation_score(learned: &Tensor, reference: &Tensor) -> Result<CorrelationScore> {
    let n = reference.rows();
    for (name, m) in [("learned", learned), ("reference", reference)] {
        if !m.is_matrix() || m.rows() != m.cols() {
            return Err(Error::shape("correlation_score", format!("{name} matrix must be square, got {:?}", m.shape())));
        }
    }
    if learned.rows() != n {
        return Err(Error::shape("correlation_score", format!("{} vs {n} classes", learned.rows())));
    }
    let per_class = (0..n)
        .map(|i| kendall_tau_b(&off_diagonal(reference, i), &off_diagonal(learned, i)))
        .collect::<Result<Vec<_>>>()?;
    let mean = per_class.iter().sum::<f64>() / n as f64;
    Ok(CorrelationScore { mean, per_class })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_reversed() {
        assert_eq!(kendall_tau_b(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(kendall_tau_b(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn tied_example() {
        // pairs: (1,1)-(2,3) C, (1,1)-(2,2) C, (1,1)-(3,4) C, (2,3)-(2,2) tie in a,
        // (2,3)-(3,4) C, (2,2)-(3,4) C  => C=5, D=0, n0=6, n1=1, n2=0
        let t = kendall_tau_b(&[1.0, 2.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!(t, 5.0 / (5.0f64 * 6.0).sqrt());
    }

    #[test]
    fn constant_input_gives_zero() {
        assert_eq!(kendall_tau_b(&[1.0, 1.0, 1.0], &[3.0, 1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn input_errors() {
        assert!(kendall_tau_b(&[1.0, 2.0], &[1.0]).is_err());
        assert!(kendall_tau_b(&[1.0], &[1.0]).is_err());
        assert!(kendall_tau_b(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn one_hot_labels_score_zero() {
        let one_hot = label_distances(&LabelTable::one_hot(4).unwrap());
        assert!((one_hot.get(0, 1) - 2f64.sqrt()).abs() < 1e-15);
        let reference = Tensor::from_rows(&[
            [0.0, 2.0, 4.0, 4.0],
            [2.0, 0.0, 4.0, 4.0],
            [4.0, 4.0, 0.0, 2.0],
            [4.0, 4.0, 2.0, 0.0],
        ])
        .unwrap();
        assert_eq!(correlation_score(&one_hot, &reference).unwrap().mean, 0.0);
        assert_eq!(correlation_score(&reference, &reference).unwrap().mean, 1.0);
    }

    #[test]
    fn order_mismatch() {
        assert!(correlation_score(&Tensor::zeros(&[3, 3]), &Tensor::zeros(&[4, 4])).is_err());
    }
}
