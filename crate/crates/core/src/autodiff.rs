//! Reverse-mode automatic differentiation over a single-use tape.
//!
//! Every operation appends a node holding its forward value. Nodes are
//! created after their inputs, so creation order is a topological order and
//! the backward sweep simply walks the node list in reverse.

use crate::error::{Error, Result};
use crate::tensor::{self, Tensor, NORM_FLOOR};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRowVector(Var, Var),
    Relu(Var),
    Log(Var),
    Exp(Var),
    RowSoftmax(Var),
    RowLogSoftmax(Var),
    RowL2Distance(Var, Var),
    RowNormalize(Var, Vec<f64>),
    Gather(Var, Vec<usize>),
    Sum(Var),
    Mean(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    spent: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Result<Var> {
        if self.spent {
            return Err(Error::Usage("tape already consumed by backward".into()));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Records a trainable leaf whose gradient is reported by `backward`.
    pub fn param(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Leaf, true)
    }

    /// Records a constant leaf; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::matmul(self.value(a), self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::MatMul(a, b), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = tensor::transpose(self.value(a))?;
        let rg = self.rg(a);
        self.push(out, Op::Transpose(a), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::add(self.value(a), self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::sub(self.value(a), self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Sub(a, b), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::mul(self.value(a), self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Mul(a, b), rg)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = tensor::scale(self.value(a), s)?;
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, s), rg)
    }

    pub fn add_row_vector(&mut self, a: Var, v: Var) -> Result<Var> {
        let out = tensor::add_row_vector(self.value(a), self.value(v))?;
        let rg = self.rg(a) || self.rg(v);
        self.push(out, Op::AddRowVector(a, v), rg)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = tensor::relu(self.value(a));
        let rg = self.rg(a);
        self.push(out, Op::Relu(a), rg)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let out = tensor::log(self.value(a))?;
        let rg = self.rg(a);
        self.push(out, Op::Log(a), rg)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let out = tensor::exp(self.value(a))?;
        let rg = self.rg(a);
        self.push(out, Op::Exp(a), rg)
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        let out = tensor::row_softmax(self.value(a))?;
        let rg = self.rg(a);
        self.push(out, Op::RowSoftmax(a), rg)
    }

    /// Row-wise `log(softmax(a))`, computed without forming the
    /// probabilities so that vanishing entries stay finite.
    pub fn row_log_softmax(&mut self, a: Var) -> Result<Var> {
        let out = tensor::row_log_softmax(self.value(a))?;
        let rg = self.rg(a);
        self.push(out, Op::RowLogSoftmax(a), rg)
    }

    pub fn row_l2_distance(&mut self, z: Var, c: Var) -> Result<Var> {
        let out = tensor::row_l2_distance(self.value(z), self.value(c))?;
        let rg = self.rg(z) || self.rg(c);
        self.push(out, Op::RowL2Distance(z, c), rg)
    }

    /// Unit-normalizes each row. Rows with norm at or below 1e-12 map to zero
    /// and receive zero gradient.
    pub fn row_normalize(&mut self, a: Var) -> Result<Var> {
        let (out, norms) = tensor::row_normalize(self.value(a))?;
        let rg = self.rg(a);
        self.push(out, Op::RowNormalize(a, norms), rg)
    }

    /// Picks `a[i, idx[i]]` for every row `i`, giving a length-`m` vector.
    pub fn gather(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let t = self.value(a);
        if !t.is_matrix() || t.rows() != idx.len() {
            return Err(Error::shape(
                "gather",
                format!("{} indices for shape {:?}", idx.len(), t.shape()),
            ));
        }
        let n = t.cols();
        if let Some(&bad) = idx.iter().find(|&&j| j >= n) {
            return Err(Error::shape("gather", format!("column {bad} out of range {n}")));
        }
        let data = idx.iter().enumerate().map(|(i, &j)| t.get(i, j)).collect();
        let out = Tensor::vector(data)?;
        let rg = self.rg(a);
        self.push(out, Op::Gather(a, idx.to_vec()), rg)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(out, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let out = Tensor::scalar(t.sum() / t.len() as f64);
        let rg = self.rg(a);
        self.push(out, Op::Mean(a), rg)
    }

    /// Cosine similarity between two single-row matrices, as a scalar node.
    pub fn cosine_sim(&mut self, u: Var, v: Var) -> Result<Var> {
        for x in [u, v] {
            let n = tensor::norm(self.value(x).data());
            if !(n > NORM_FLOOR) {
                return Err(Error::Degenerate(n));
            }
        }
        let nu = self.row_normalize(u)?;
        let nv = self.row_normalize(v)?;
        let p = self.mul(nu, nv)?;
        self.sum(p)
    }

    /// Backpropagates from a scalar root. The tape is consumed: its nodes are
    /// dropped and further use is rejected.
    pub fn backward(&mut self, root: Var) -> Result<Gradients> {
        if self.spent {
            return Err(Error::Usage("backward called twice on the same tape".into()));
        }
        if root.0 >= self.nodes.len() {
            return Err(Error::Usage("root is not on this tape".into()));
        }
        if !self.nodes[root.0].value.is_scalar() {
            return Err(Error::Usage(format!(
                "backward root must be scalar, got shape {:?}",
                self.nodes[root.0].value.shape()
            )));
        }
        self.spent = true;
        let nodes = std::mem::take(&mut self.nodes);
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::filled(nodes[root.0].value.shape(), 1.0));

        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let mut acc = |v: Var, delta: Tensor| {
                if !nodes[v.0].requires_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => existing.add_assign(&delta),
                    slot @ None => *slot = Some(delta),
                }
            };
            let val = |v: Var| &nodes[v.0].value;
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    if nodes[a.0].requires_grad {
                        acc(*a, tensor::matmul(&g, &tensor::transpose(val(*b))?)?);
                    }
                    if nodes[b.0].requires_grad {
                        acc(*b, tensor::matmul(&tensor::transpose(val(*a))?, &g)?);
                    }
                }
                Op::Transpose(a) => acc(*a, tensor::transpose(&g)?),
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g.map(|x| -x));
                }
                Op::Mul(a, b) => {
                    acc(*a, g.zip_map(val(*b), |x, y| x * y));
                    acc(*b, g.zip_map(val(*a), |x, y| x * y));
                }
                Op::Scale(a, s) => acc(*a, g.map(|x| x * s)),
                Op::AddRowVector(a, v) => {
                    let mut colsum = vec![0.0; g.cols()];
                    for i in 0..g.rows() {
                        for (c, x) in colsum.iter_mut().zip(g.row(i)) {
                            *c += x;
                        }
                    }
                    let vshape = val(*v).shape().to_vec();
                    acc(*v, Tensor::new(vshape, colsum)?);
                    acc(*a, g);
                }
                Op::Relu(a) => acc(*a, g.zip_map(val(*a), |x, y| if y > 0.0 { x } else { 0.0 })),
                Op::Log(a) => acc(*a, g.zip_map(val(*a), |x, y| x / y)),
                Op::Exp(a) => acc(*a, g.zip_map(&node.value, |x, y| x * y)),
                Op::RowSoftmax(a) => {
                    let y = &node.value;
                    let mut ga = g.clone();
                    for i in 0..y.rows() {
                        let inner = tensor::dot(g.row(i), y.row(i));
                        for (o, (gi, yi)) in ga.row_mut(i).iter_mut().zip(g.row(i).iter().zip(y.row(i))) {
                            *o = yi * (gi - inner);
                        }
                    }
                    acc(*a, ga);
                }
                Op::RowLogSoftmax(a) => {
                    let y = &node.value;
                    let mut ga = g.clone();
                    for i in 0..y.rows() {
                        let total: f64 = g.row(i).iter().sum();
                        for (o, (gi, yi)) in ga.row_mut(i).iter_mut().zip(g.row(i).iter().zip(y.row(i))) {
                            *o = gi - yi.exp() * total;
                        }
                    }
                    acc(*a, ga);
                }
                Op::RowL2Distance(z, c) => {
                    let (zv, cv, d) = (val(*z), val(*c), &node.value);
                    let mut gz = Tensor::zeros(zv.shape());
                    let mut gc = Tensor::zeros(cv.shape());
                    for i in 0..zv.rows() {
                        for j in 0..cv.rows() {
                            let w = g.get(i, j) / d.get(i, j);
                            if w == 0.0 {
                                continue;
                            }
                            let (zi, cj) = (zv.row(i), cv.row(j));
                            for k in 0..zi.len() {
                                let diff = w * (zi[k] - cj[k]);
                                gz.row_mut(i)[k] += diff;
                                gc.row_mut(j)[k] -= diff;
                            }
                        }
                    }
                    acc(*z, gz);
                    acc(*c, gc);
                }
                Op::RowNormalize(a, norms) => {
                    let y = &node.value;
                    let mut ga = Tensor::zeros(y.shape());
                    for (i, &n) in norms.iter().enumerate() {
                        if n > NORM_FLOOR {
                            let inner = tensor::dot(y.row(i), g.row(i));
                            for (o, (gi, yi)) in ga.row_mut(i).iter_mut().zip(g.row(i).iter().zip(y.row(i))) {
                                *o = (gi - yi * inner) / n;
                            }
                        }
                    }
                    acc(*a, ga);
                }
                Op::Gather(a, idx) => {
                    let mut ga = Tensor::zeros(val(*a).shape());
                    for (i, &j) in idx.iter().enumerate() {
                        ga.row_mut(i)[j] += g.data()[i];
                    }
                    acc(*a, ga);
                }
                Op::Sum(a) => {
                    let s = g.data()[0];
                    acc(*a, Tensor::filled(val(*a).shape(), s));
                }
                Op::Mean(a) => {
                    let n = val(*a).len() as f64;
                    let s = g.data()[0] / n;
                    acc(*a, Tensor::filled(val(*a).shape(), s));
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Compares the tape gradient of a scalar function against central finite
/// differences with step `h`. Returns the largest
/// `|analytic - numeric| / max(1, |analytic|)` over all coordinates of `x`.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let xv = tape.param(x.clone())?;
    let out = f(&mut tape, xv)?;
    let grads = tape.backward(out)?;
    let analytic = grads
        .get(xv)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(x.shape()));

    let eval = |p: &Tensor| -> Result<f64> {
        let mut t = Tape::new();
        let v = t.constant(p.clone())?;
        let o = f(&mut t, v)?;
        t.value(o)
            .item()
            .ok_or_else(|| Error::Usage("grad_check function must be scalar".into()))
    };

    let mut worst = 0.0f64;
    let mut probe = x.clone();
    for k in 0..x.len() {
        let orig = probe.data()[k];
        probe.data_mut()[k] = orig + h;
        let up = eval(&probe)?;
        probe.data_mut()[k] = orig - h;
        let down = eval(&probe)?;
        probe.data_mut()[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic.data()[k];
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gradient_is_ones() {
        let mut t = Tape::new();
        let w = t.param(Tensor::vector(vec![0.3, -1.0, 2.0]).unwrap()).unwrap();
        let s = t.sum(w).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn squared_norm_gradient() {
        let mut t = Tape::new();
        let w = t.param(Tensor::vector(vec![1.0, 2.0]).unwrap()).unwrap();
        let sq = t.mul(w, w).unwrap();
        let s = t.sum(sq).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn relu_subgradient() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![-1.0, 0.0, 2.0]).unwrap()).unwrap();
        let r = t.relu(x).unwrap();
        let s = t.sum(r).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn backward_is_single_use() {
        let mut t = Tape::new();
        let w = t.param(Tensor::scalar(2.0)).unwrap();
        let s = t.sum(w).unwrap();
        t.backward(s).unwrap();
        assert!(matches!(t.backward(s), Err(Error::Usage(_))));
        assert!(t.is_empty());
        assert!(t.param(Tensor::scalar(1.0)).is_err());
    }

    #[test]
    fn backward_rejects_non_scalar_root() {
        let mut t = Tape::new();
        let w = t.param(Tensor::vector(vec![1.0, 2.0]).unwrap()).unwrap();
        assert!(matches!(t.backward(w), Err(Error::Usage(_))));
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut t = Tape::new();
        let a = t.param(Tensor::from_rows(&[[1.0, 2.0]]).unwrap()).unwrap();
        let b = t.constant(Tensor::from_rows(&[[3.0], [4.0]]).unwrap()).unwrap();
        let p = t.matmul(a, b).unwrap();
        let s = t.sum(p).unwrap();
        let g = t.backward(s).unwrap();
        assert!(g.get(b).is_none());
        assert_eq!(g.get(a).unwrap().data(), &[3.0, 4.0]);
    }

    #[test]
    fn square_grad_check() {
        let err = grad_check(
            |t, x| {
                let sq = t.mul(x, x)?;
                t.sum(sq)
            },
            &Tensor::scalar(3.0),
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn cosine_on_tape_rejects_zero_rows() {
        let mut t = Tape::new();
        let u = t.param(Tensor::from_rows(&[[0.0, 0.0]]).unwrap()).unwrap();
        let v = t.param(Tensor::from_rows(&[[1.0, 0.0]]).unwrap()).unwrap();
        assert!(matches!(t.cosine_sim(u, v), Err(Error::Degenerate(_))));
    }
}
