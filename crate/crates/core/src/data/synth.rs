//! Gaussian clusters whose means follow a planted tree: each level adds a
//! random offset that shrinks geometrically with depth, so classes sharing
//! a recent ancestor end up close together.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::analysis::HierarchyTree;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::tensor::{self, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    /// Tree depth `D`; leaves sit at depth `D`.
    pub depth: usize,
    /// Children per internal node `B`; there are `B^D` classes.
    pub branching: usize,
    pub dim: usize,
    /// Per-coordinate standard deviation of the samples.
    pub sigma: f64,
    /// Offset shrink factor per level, in `(0, 1)`.
    pub ratio: f64,
    pub samples_per_class: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            depth: 3,
            branching: 2,
            dim: 16,
            sigma: 0.5,
            ratio: 0.4,
            samples_per_class: 200,
            seed: 0,
        }
    }
}

const SPEC_KEYS: &[&str] = &["depth", "branching", "dim", "sigma", "ratio", "samples_per_class", "seed"];

impl SynthSpec {
    pub fn num_classes(&self) -> usize {
        self.branching.pow(self.depth as u32)
    }

    /// Offset length for children of a node at `level` (root is level 0).
    pub fn offset_scale(&self, level: usize) -> f64 {
        10.0 * self.sigma * self.ratio.powi(level as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.branching < 2 || self.dim == 0 || self.samples_per_class == 0 {
            return Err(Error::Config(format!(
                "synthetic spec needs depth >= 1, branching >= 2, dim >= 1, samples >= 1: {self:?}"
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Config(format!("ratio must lie in (0, 1), got {}", self.ratio)));
        }
        Ok(())
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        kv.check_keys(SPEC_KEYS)?;
        let d = SynthSpec::default();
        let spec = SynthSpec {
            depth: kv.get_or("depth", d.depth)?,
            branching: kv.get_or("branching", d.branching)?,
            dim: kv.get_or("dim", d.dim)?,
            sigma: kv.get_or("sigma", d.sigma)?,
            ratio: kv.get_or("ratio", d.ratio)?,
            samples_per_class: kv.get_or("samples_per_class", d.samples_per_class)?,
            seed: kv.get_or("seed", d.seed)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SynthSpec::from_kv(&KeyValues::parse(&text)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "depth = {}", self.depth);
        let _ = writeln!(s, "branching = {}", self.branching);
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "sigma = {}", self.sigma);
        let _ = writeln!(s, "ratio = {}", self.ratio);
        let _ = writeln!(s, "samples_per_class = {}", self.samples_per_class);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

#[derive(Clone, Debug)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub tree: HierarchyTree,
    /// True class means, one row per class.
    pub means: Tensor,
}

fn path_name(prefix: &str, path: &[usize]) -> String {
    let mut s = prefix.to_string();
    for p in path {
        let _ = write!(s, "{p}");
    }
    s
}

pub fn gen_synthetic(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = |rng: &mut ChaCha8Rng| loop {
        let v: Vec<f64> = (0..spec.dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = tensor::norm(&v);
        if n > 1e-12 {
            break v.into_iter().map(|x| x / n).collect::<Vec<f64>>();
        }
    };

    // (path, mean) per node of the current level, in lexicographic path order
    let mut frontier: Vec<(Vec<usize>, Vec<f64>)> = vec![(Vec::new(), vec![0.0; spec.dim])];
    let mut edges: Vec<(String, String)> = Vec::new();
    let node_name = |path: &[usize]| -> String {
        if path.is_empty() {
            "root".into()
        } else if path.len() == spec.depth {
            path_name("c", path)
        } else {
            path_name("g", path)
        }
    };
    for level in 0..spec.depth {
        let scale = spec.offset_scale(level);
        let mut next = Vec::with_capacity(frontier.len() * spec.branching);
        for (path, mean) in &frontier {
            for b in 0..spec.branching {
                let u = unit(&mut rng);
                let child_mean: Vec<f64> = mean.iter().zip(&u).map(|(m, x)| m + scale * x).collect();
                let mut child = path.clone();
                child.push(b);
                edges.push((node_name(path), node_name(&child)));
                next.push((child, child_mean));
            }
        }
        frontier = next;
    }

    let n_classes = frontier.len();
    let class_names: Vec<String> = frontier.iter().map(|(p, _)| node_name(p)).collect();
    let mut means = Tensor::zeros(&[n_classes, spec.dim]);
    for (c, (_, m)) in frontier.iter().enumerate() {
        means.row_mut(c).copy_from_slice(m);
    }
    let m = n_classes * spec.samples_per_class;
    let mut data = Vec::with_capacity(m * spec.dim);
    let mut labels = Vec::with_capacity(m);
    for c in 0..n_classes {
        for _ in 0..spec.samples_per_class {
            for &mu in means.row(c) {
                let e: f64 = StandardNormal.sample(&mut rng);
                data.push(mu + spec.sigma * e);
            }
            labels.push(c);
        }
    }
    let features = Tensor::matrix(m, spec.dim, data)?;
    let dataset = Dataset::new(features, labels, class_names, "synthetic")?;
    let tree = HierarchyTree::from_edges(&edges)?;
    Ok(Synthetic { dataset, tree, means })
}
