//! Brute-force reference implementations on plain std types. Shared by the
//! library's test modules and the acceptance target.

#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};

/// Class means by direct summation in row order, then one division.
pub fn centroids(z: &[Vec<f64>], labels: &[usize], num_classes: usize) -> Vec<(usize, Vec<f64>)> {
    let d = z.first().map_or(0, Vec::len);
    let mut out = Vec::new();
    for c in 0..num_classes {
        let mut sum = vec![0.0; d];
        let mut count = 0usize;
        for (row, &y) in z.iter().zip(labels) {
            if y == c {
                count += 1;
                for k in 0..d {
                    sum[k] += row[k];
                }
            }
        }
        if count > 0 {
            out.push((c, sum.into_iter().map(|s| s / count as f64).collect()));
        }
    }
    out
}

pub fn distances(z: &[Vec<f64>], c: &[Vec<f64>], eps: f64) -> Vec<Vec<f64>> {
    z.iter()
        .map(|zi| {
            c.iter()
                .map(|cj| {
                    let mut sq = 0.0;
                    for k in 0..zi.len() {
                        sq += (zi[k] - cj[k]).powi(2);
                    }
                    (sq + eps).sqrt()
                })
                .collect()
        })
        .collect()
}

/// τ-b by enumerating every pair.
pub fn tau_b(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let (mut conc, mut disc, mut ties_a, mut ties_b) = (0i64, 0i64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let da = a[i] - a[j];
            let db = b[i] - b[j];
            if da == 0.0 {
                ties_a += 1;
            }
            if db == 0.0 {
                ties_b += 1;
            }
            if da != 0.0 && db != 0.0 {
                if (da > 0.0) == (db > 0.0) {
                    conc += 1;
                } else {
                    disc += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as u64;
    if ties_a == n0 || ties_b == n0 {
        return 0.0;
    }
    (conc - disc) as f64 / (((n0 - ties_a) * (n0 - ties_b)) as f64).sqrt()
}

/// Average linkage recomputing every cluster distance from member pairs.
/// Returns `(min_id, max_id, height, size)` per merge, scipy id convention.
pub fn average_linkage(d: &[Vec<f64>]) -> Vec<(usize, usize, f64, usize)> {
    let n = d.len();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut out = Vec::new();
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let (ia, ma) = &clusters[a];
                let (ib, mb) = &clusters[b];
                let mut s = 0.0;
                for &x in ma {
                    for &y in mb {
                        s += d[x][y];
                    }
                }
                let h = s / (ma.len() * mb.len()) as f64;
                let key = ((*ia).min(*ib), (*ia).max(*ib));
                let better = match best {
                    None => true,
                    Some((bh, lo, hi, _, _)) => h < bh || (h == bh && key < (lo, hi)),
                };
                if better {
                    best = Some((h, key.0, key.1, a, b));
                }
            }
        }
        let (h, lo, hi, a, b) = best.unwrap();
        let mut members = clusters[a].1.clone();
        members.extend(clusters[b].1.iter().copied());
        let size = members.len();
        clusters.remove(b);
        clusters.remove(a);
        clusters.push((n + step, members));
        out.push((lo, hi, h, size));
    }
    out
}

/// Path lengths by breadth-first search over the undirected edge list.
pub fn tree_distances(edges: &[(String, String)], classes: &[String]) -> Vec<Vec<f64>> {
    let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
    for (p, c) in edges {
        adj.entry(p).or_default().push(c);
        adj.entry(c).or_default().push(p);
    }
    classes
        .iter()
        .map(|src| {
            let mut dist: HashMap<&str, usize> = HashMap::new();
            let mut queue = VecDeque::new();
            dist.insert(src.as_str(), 0);
            queue.push_back(src.as_str());
            while let Some(u) = queue.pop_front() {
                let du = dist[u];
                for &v in adj.get(u).map(Vec::as_slice).unwrap_or(&[]) {
                    if !dist.contains_key(v) {
                        dist.insert(v, du + 1);
                        queue.push_back(v);
                    }
                }
            }
            classes.iter().map(|t| dist[t.as_str()] as f64).collect()
        })
        .collect()
}

/// Matrix product by the textbook triple loop.
pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (m, k, n) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; n]; m];
    for i in 0..m {
        for j in 0..n {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

/// Random binary-ish tree over `leaves` leaf names: returns edges with
/// internal nodes named `n0, n1, ...`, built by repeatedly joining two
/// random subtrees. `pick(k)` must return a value in `0..k`.
pub fn random_tree(leaves: &[String], mut pick: impl FnMut(usize) -> usize) -> Vec<(String, String)> {
    let mut roots: Vec<String> = leaves.to_vec();
    let mut edges = Vec::new();
    let mut next = 0;
    while roots.len() > 1 {
        let a = roots.remove(pick(roots.len()));
        let b = roots.remove(pick(roots.len()));
        let parent = format!("n{next}");
        next += 1;
        edges.push((parent.clone(), a));
        edges.push((parent.clone(), b));
        // occasionally attach a third child to make non-binary nodes
        if roots.len() > 1 && pick(4) == 0 {
            let c = roots.remove(pick(roots.len()));
            edges.push((parent.clone(), c));
        }
        roots.push(parent);
    }
    edges
}
