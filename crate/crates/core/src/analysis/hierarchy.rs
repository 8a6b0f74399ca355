use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Rooted tree over named nodes, read from `parent<TAB>child` edge lines.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyTree {
    names: Vec<String>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    root: usize,
    index: HashMap<String, usize>,
}

impl HierarchyTree {
    /// Builds a tree from `(parent, child)` name pairs.
    pub fn from_edges<S: AsRef<str>>(edges: &[(S, S)]) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut intern = |name: &str, names: &mut Vec<String>| -> usize {
            *index.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                names.len() - 1
            })
        };
        let mut pairs = Vec::with_capacity(edges.len());
        for (p, c) in edges {
            let (p, c) = (p.as_ref(), c.as_ref());
            if p == c {
                return Err(Error::Data(format!("self-loop on node {p:?}")));
            }
            let pi = intern(p, &mut names);
            let ci = intern(c, &mut names);
            pairs.push((pi, ci));
        }
        let n = names.len();
        if n == 0 {
            return Err(Error::Data("hierarchy has no edges".into()));
        }
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        for (p, c) in pairs {
            match parent[c] {
                Some(existing) if existing == p => continue,
                Some(existing) => {
                    return Err(Error::Data(format!(
                        "node {:?} has two parents: {:?} and {:?}",
                        names[c], names[existing], names[p]
                    )))
                }
                None => {
                    parent[c] = Some(p);
                    children[p].push(c);
                }
            }
        }
        let roots: Vec<usize> = (0..n).filter(|&i| parent[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::Data(format!("hierarchy must have exactly one root, found {}", roots.len())));
        }
        let root = roots[0];
        let mut depth = vec![usize::MAX; n];
        depth[root] = 0;
        let mut stack = vec![root];
        let mut seen = 1;
        while let Some(u) = stack.pop() {
            for &c in &children[u] {
                depth[c] = depth[u] + 1;
                seen += 1;
                stack.push(c);
            }
        }
        if seen != n {
            return Err(Error::Data("hierarchy contains a cycle".into()));
        }
        let index = names.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(HierarchyTree {
            names,
            parent,
            children,
            depth,
            root,
            index,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(p), Some(c), None) if !p.is_empty() && !c.is_empty() => edges.push((p, c)),
                _ => {
                    return Err(Error::Data(format!(
                        "hierarchy line {}: expected `parent<TAB>child`, got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        HierarchyTree::from_edges(&edges)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        HierarchyTree::parse(&text).map_err(|e| match e {
            Error::Data(d) => Error::format(path, d),
            other => other,
        })
    }

    /// Edge list text in the same format [`HierarchyTree::parse`] reads,
    /// parents before children.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![self.root];
        while let Some(u) = stack.pop() {
            for &c in &self.children[u] {
                let _ = writeln!(out, "{}\t{}", self.names[u], self.names[c]);
            }
            stack.extend(self.children[u].iter().rev());
        }
        out
    }

    pub fn root(&self) -> &str {
        &self.names[self.root]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn node(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        self.parent[id]
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.children[id]
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.children[id].is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &str> {
        (0..self.len()).filter(|&i| self.is_leaf(i)).map(|i| self.names[i].as_str())
    }

    /// Positions in `classes` whose names are leaves of this tree.
    pub fn mapped_classes<S: AsRef<str>>(&self, classes: &[S]) -> Vec<usize> {
        classes
            .iter()
            .enumerate()
            .filter(|(_, c)| self.node(c.as_ref()).is_some_and(|id| self.is_leaf(id)))
            .map(|(i, _)| i)
            .collect()
    }

    /// Number of edges on the path between two nodes.
    pub fn path_length(&self, mut a: usize, mut b: usize) -> usize {
        let mut steps = 0;
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("non-root");
            steps += 1;
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root");
            steps += 1;
        }
        while a != b {
            a = self.parent[a].expect("non-root");
            b = self.parent[b].expect("non-root");
            steps += 2;
        }
        steps
    }
}

/// Edge-count path lengths between the leaves named by `classes`.
pub fn tree_distances<S: AsRef<str>>(tree: &HierarchyTree, classes: &[S]) -> Result<Tensor> {
    let ids = classes
        .iter()
        .map(|c| {
            let c = c.as_ref();
            match tree.node(c) {
                Some(id) if tree.is_leaf(id) => Ok(id),
                _ => Err(Error::Data(format!("class {c:?} is not a leaf of the hierarchy"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let n = ids.len();
    if n == 0 {
        return Err(Error::Data("no classes to compare".into()));
    }
    let mut out = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in i + 1..n {
            let d = tree.path_length(ids[i], ids[j]) as f64;
            out.row_mut(i)[j] = d;
            out.row_mut(j)[i] = d;
        }
    }
    Ok(out)
}
