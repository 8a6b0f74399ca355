//! Average-linkage agglomerative clustering and Newick serialization.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One agglomeration step. Cluster ids follow the usual convention: leaves
/// are `0..n`, and the cluster formed by merge `s` gets id `n + s`.
#[derive(Clone, Debug, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dendrogram {
    leaf_names: Vec<String>,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn num_leaves(&self) -> usize {
        self.leaf_names.len()
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn leaf_names(&self) -> &[String] {
        &self.leaf_names
    }

    pub fn with_leaf_names<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() != self.leaf_names.len() {
            return Err(Error::shape("dendrogram", format!("{} names for {} leaves", names.len(), self.leaf_names.len())));
        }
        self.leaf_names = names;
        Ok(self)
    }

    fn height_of(&self, id: usize) -> f64 {
        let n = self.num_leaves();
        if id < n {
            0.0
        } else {
            self.merges[id - n].height
        }
    }

    /// Newick text with branch length = parent height − child height.
    pub fn to_newick(&self) -> String {
        let n = self.num_leaves();
        let mut out = String::new();
        if self.merges.is_empty() {
            out.push_str(&quote_name(&self.leaf_names[0]));
            out.push(';');
            return out;
        }
        self.write_node(&mut out, n + self.merges.len() - 1);
        out.push(';');
        out
    }

    fn write_node(&self, out: &mut String, id: usize) {
        let n = self.num_leaves();
        if id < n {
            out.push_str(&quote_name(&self.leaf_names[id]));
            return;
        }
        let m = &self.merges[id - n];
        out.push('(');
        for (k, child) in [m.left, m.right].into_iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            self.write_node(out, child);
            let _ = write!(out, ":{}", m.height - self.height_of(child));
        }
        out.push(')');
    }
}

fn quote_name(name: &str) -> String {
    let special = |c: char| c.is_whitespace() || "()[]',:;".contains(c);
    if name.is_empty() || name.chars().any(special) {
        format!("'{}'", name.replace('\'', "''"))
    } else {
        name.to_string()
    }
}

/// Clusters a symmetric, zero-diagonal distance matrix, always merging the
/// closest pair of active clusters. Equal distances go to the
/// lexicographically smallest `(id_a, id_b)` pair.
pub fn average_linkage(dist: &Tensor) -> Result<Dendrogram> {
    if !dist.is_matrix() || dist.rows() != dist.cols() {
        return Err(Error::shape("average_linkage", format!("{:?}", dist.shape())));
    }
    let n = dist.rows();
    if n < 2 {
        return Err(Error::shape("average_linkage", "need at least two observations"));
    }
    for i in 0..n {
        if dist.get(i, i) != 0.0 {
            return Err(Error::domain("average_linkage", format!("nonzero diagonal at {i}")));
        }
        for j in i + 1..n {
            let (a, b) = (dist.get(i, j), dist.get(j, i));
            if a != b || !a.is_finite() {
                return Err(Error::domain("average_linkage", format!("asymmetric or non-finite entry ({i},{j})")));
            }
        }
    }

    // slot -> cluster id; distances kept between slots, merged cluster reuses
    // the lower slot
    let mut d: Vec<Vec<f64>> = (0..n).map(|i| dist.row(i).to_vec()).collect();
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..n {
            if !active[a] {
                continue;
            }
            for b in a + 1..n {
                if !active[b] {
                    continue;
                }
                let key = (ids[a].min(ids[b]), ids[a].max(ids[b]));
                let better = match best {
                    None => true,
                    Some((bd, bkey, _, _)) => d[a][b] < bd || (d[a][b] == bd && key < bkey),
                };
                if better {
                    best = Some((d[a][b], key, a, b));
                }
            }
        }
        let (height, (lo, hi), a, b) = best.expect("at least two active clusters");
        let (na, nb) = (sizes[a], sizes[b]);
        for k in 0..n {
            if active[k] && k != a && k != b {
                let v = (na as f64 * d[a][k] + nb as f64 * d[b][k]) / (na + nb) as f64;
                d[a][k] = v;
                d[k][a] = v;
            }
        }
        active[b] = false;
        sizes[a] = na + nb;
        ids[a] = n + step;
        merges.push(Merge {
            left: lo,
            right: hi,
            height,
            size: na + nb,
        });
    }
    Ok(Dendrogram {
        leaf_names: (0..n).map(|i| i.to_string()).collect(),
        merges,
    })
}

/// Parsed Newick node.
#[derive(Clone, Debug, PartialEq)]
pub struct NewickNode {
    pub name: Option<String>,
    pub length: Option<f64>,
    pub children: Vec<NewickNode>,
}

impl NewickNode {
    /// Height above the leaves, taking the maximum over children.
    pub fn height(&self) -> f64 {
        self.children
            .iter()
            .map(|c| c.height() + c.length.unwrap_or(0.0))
            .fold(0.0, f64::max)
    }

    pub fn leaf_names(&self) -> Vec<String> {
        if self.children.is_empty() {
            return vec![self.name.clone().unwrap_or_default()];
        }
        self.children.iter().flat_map(|c| c.leaf_names()).collect()
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Data(format!("newick: {msg} at byte {}", self.pos))
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn node(&mut self) -> Result<NewickNode> {
        let mut children = Vec::new();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                children.push(self.node()?);
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected ',' or ')'")),
                }
            }
        }
        let name = self.name()?;
        let length = if self.peek() == Some(b':') {
            self.pos += 1;
            let start = self.pos;
            while let Some(c) = self.peek() {
                if b",);".contains(&c) {
                    break;
                }
                self.pos += 1;
            }
            let text = std::str::from_utf8(&self.s[start..self.pos]).map_err(|_| self.err("bad utf-8"))?;
            Some(text.trim().parse::<f64>().map_err(|_| self.err("bad branch length"))?)
        } else {
            None
        };
        Ok(NewickNode { name, length, children })
    }

    fn name(&mut self) -> Result<Option<String>> {
        if self.peek() == Some(b'\'') {
            self.pos += 1;
            let mut bytes = Vec::new();
            loop {
                match self.peek() {
                    None => return Err(self.err("unterminated quoted name")),
                    Some(b'\'') if self.s.get(self.pos + 1) == Some(&b'\'') => {
                        bytes.push(b'\'');
                        self.pos += 2;
                    }
                    Some(b'\'') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => {
                        bytes.push(c);
                        self.pos += 1;
                    }
                }
            }
            return String::from_utf8(bytes).map(Some).map_err(|_| self.err("bad utf-8"));
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if b"(),:;".contains(&c) {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Ok(None);
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).map_err(|_| self.err("bad utf-8"))?;
        Ok(Some(text.trim().to_string()))
    }
}

pub fn parse_newick(text: &str) -> Result<NewickNode> {
    let text = text.trim();
    let mut p = Parser { s: text.as_bytes(), pos: 0 };
    let root = p.node()?;
    if p.peek() != Some(b';') || p.pos + 1 != text.len() {
        return Err(p.err("expected trailing ';'"));
    }
    Ok(root)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_leaves() {
        let d = Tensor::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let den = average_linkage(&d).unwrap().with_leaf_names(["a", "b"]).unwrap();
        assert_eq!(den.merges(), &[Merge { left: 0, right: 1, height: 1.0, size: 2 }]);
        assert_eq!(den.to_newick(), "(a:1,b:1);");
    }

    #[test]
    fn three_points_hand_computed() {
        let d = Tensor::from_rows(&[[0.0, 1.0, 10.0], [1.0, 0.0, 10.0], [10.0, 10.0, 0.0]]).unwrap();
        let den = average_linkage(&d).unwrap();
        assert_eq!(den.merges()[0].height, 1.0);
        assert_eq!(den.merges()[1], Merge { left: 2, right: 3, height: 10.0, size: 3 });
    }

    #[test]
    fn ties_prefer_smallest_ids() {
        let d = Tensor::from_rows(&[[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]).unwrap();
        let den = average_linkage(&d).unwrap();
        assert_eq!((den.merges()[0].left, den.merges()[0].right), (0, 1));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(average_linkage(&Tensor::zeros(&[1, 1])).is_err());
        let asym = Tensor::from_rows(&[[0.0, 1.0], [2.0, 0.0]]).unwrap();
        assert!(average_linkage(&asym).is_err());
    }

    #[test]
    fn quoted_names_round_trip() {
        let d = Tensor::from_rows(&[[0.0, 2.5], [2.5, 0.0]]).unwrap();
        let den = average_linkage(&d).unwrap().with_leaf_names(["snow leopard", "o'brien"]).unwrap();
        let text = den.to_newick();
        assert_eq!(text, "('snow leopard':2.5,'o''brien':2.5);");
        let back = parse_newick(&text).unwrap();
        assert_eq!(back.leaf_names(), vec!["snow leopard".to_string(), "o'brien".to_string()]);
        assert_eq!(back.height(), 2.5);
    }

    #[test]
    fn parse_errors() {
        assert!(parse_newick("(a:1,b:1)").is_err());
        assert!(parse_newick("(a:1,b:x);").is_err());
        assert!(parse_newick("(a:1,b:1;").is_err());
    }
}
