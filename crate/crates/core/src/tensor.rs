//! Dense row-major `f64` tensors and the forward kernels shared by the
//! gradient tape and plain (tape-free) evaluation.

use crate::error::{Error, Result};

/// Smoothing added under the square root of [`row_l2_distance`].
pub const DISTANCE_EPS: f64 = 1e-12;

/// Rows or vectors with a norm at or below this are treated as degenerate.
pub const NORM_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::shape("tensor", format!("zero dimension in {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {shape:?} needs {n} values, got {}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape("from_rows", "ragged rows"));
            }
            data.extend_from_slice(r);
        }
        Tensor::matrix(rows.len(), cols, data)
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Tensor::new(vec![n], data)
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Option<f64> {
        self.is_scalar().then(|| self.data[0])
    }

    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }

    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => 1,
            _ => self.shape[0],
        }
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => self.shape[0],
            _ => self.shape[1..].iter().product(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols() + col]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    /// Selects rows by index into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Tensor {
        let c = self.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Tensor {
            shape: vec![idx.len(), c],
            data,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

pub(crate) fn check_finite(op: &'static str, t: Tensor) -> Result<Tensor> {
    if t.all_finite() {
        Ok(t)
    } else {
        Err(Error::NonFinite(op))
    }
}

fn require_matrix(op: &'static str, t: &Tensor) -> Result<()> {
    if t.is_matrix() {
        Ok(())
    } else {
        Err(Error::shape(op, format!("expected a matrix, got shape {:?}", t.shape())))
    }
}

fn require_same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())))
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    require_matrix("matmul", a)?;
    require_matrix("matmul", b)?;
    let (m, k) = (a.rows(), a.cols());
    let (k2, n) = (b.rows(), b.cols());
    if k != k2 {
        return Err(Error::shape("matmul", format!("{m}x{k} · {k2}x{n}")));
    }
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = a.row(i);
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = b.row(p);
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    check_finite("matmul", Tensor::matrix(m, n, out)?)
}

pub fn transpose(a: &Tensor) -> Result<Tensor> {
    require_matrix("transpose", a)?;
    let (m, n) = (a.rows(), a.cols());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a.data[i * n + j];
        }
    }
    Tensor::matrix(n, m, out)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    require_same_shape("add", a, b)?;
    check_finite("add", a.zip_map(b, |x, y| x + y))
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    require_same_shape("sub", a, b)?;
    check_finite("sub", a.zip_map(b, |x, y| x - y))
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    require_same_shape("mul", a, b)?;
    check_finite("mul", a.zip_map(b, |x, y| x * y))
}

pub fn scale(a: &Tensor, s: f64) -> Result<Tensor> {
    check_finite("scale", a.map(|x| x * s))
}

/// Adds a length-`n` vector to every row of an `m×n` matrix.
pub fn add_row_vector(a: &Tensor, v: &Tensor) -> Result<Tensor> {
    require_matrix("add_row_vector", a)?;
    if v.len() != a.cols() {
        return Err(Error::shape(
            "add_row_vector",
            format!("matrix has {} columns, vector has {}", a.cols(), v.len()),
        ));
    }
    let mut out = a.clone();
    for i in 0..a.rows() {
        for (o, b) in out.row_mut(i).iter_mut().zip(v.data()) {
            *o += b;
        }
    }
    check_finite("add_row_vector", out)
}

pub fn relu(a: &Tensor) -> Tensor {
    a.map(|x| if x > 0.0 { x } else { 0.0 })
}

pub fn log(a: &Tensor) -> Result<Tensor> {
    if let Some(bad) = a.data.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::domain("log", format!("non-positive input {bad}")));
    }
    check_finite("log", a.map(f64::ln))
}

pub fn exp(a: &Tensor) -> Result<Tensor> {
    check_finite("exp", a.map(f64::exp))
}

/// Softmax along each row, with the row maximum subtracted first.
pub fn row_softmax(logits: &Tensor) -> Result<Tensor> {
    require_matrix("row_softmax", logits)?;
    if logits.data.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("row_softmax", "NaN logit"));
    }
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    check_finite("row_softmax", out)
}

/// `log(softmax(row))` for each row via the log-sum-exp identity.
pub fn row_log_softmax(logits: &Tensor) -> Result<Tensor> {
    require_matrix("row_log_softmax", logits)?;
    if logits.data.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("row_log_softmax", "NaN logit"));
    }
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.iter_mut().for_each(|v| *v -= lse);
    }
    check_finite("row_log_softmax", out)
}

/// Pairwise smoothed Euclidean distances: `out[i][j] = sqrt(|z_i - c_j|² + ε)`.
pub fn row_l2_distance(z: &Tensor, c: &Tensor) -> Result<Tensor> {
    require_matrix("row_l2_distance", z)?;
    require_matrix("row_l2_distance", c)?;
    if z.cols() != c.cols() {
        return Err(Error::shape(
            "row_l2_distance",
            format!("latent dims {} vs {}", z.cols(), c.cols()),
        ));
    }
    let (m, n) = (z.rows(), c.rows());
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        let zi = z.row(i);
        for j in 0..n {
            let sq: f64 = zi.iter().zip(c.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            out.push((sq + DISTANCE_EPS).sqrt());
        }
    }
    check_finite("row_l2_distance", Tensor::matrix(m, n, out)?)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn euclidean(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Cosine similarity of two equal-length vectors.
pub fn cosine_sim(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::shape("cosine_sim", format!("{} vs {}", u.len(), v.len())));
    }
    let (nu, nv) = (norm(u), norm(v));
    for n in [nu, nv] {
        if !(n > NORM_FLOOR) {
            return Err(Error::Degenerate(n));
        }
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Scales each row to unit length; rows with norm at or below [`NORM_FLOOR`]
/// become zero. Returns the normalized matrix and the row norms.
pub fn row_normalize(a: &Tensor) -> Result<(Tensor, Vec<f64>)> {
    require_matrix("row_normalize", a)?;
    let mut out = a.clone();
    let mut norms = Vec::with_capacity(a.rows());
    for i in 0..a.rows() {
        let n = norm(a.row(i));
        norms.push(n);
        let row = out.row_mut(i);
        if n > NORM_FLOOR {
            row.iter_mut().for_each(|v| *v /= n);
        } else {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok((check_finite("row_normalize", out)?, norms))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn shape_product_must_match() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        assert_eq!(Tensor::scalar(3.0).item(), Some(3.0));
    }

    #[test]
    fn matmul_identity_and_selection() {
        let eye = Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let a = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(matmul(&eye, &a).unwrap(), a);

        let r = Tensor::from_rows(&[[1.0, 0.0]]).unwrap();
        let c = Tensor::from_rows(&[[2.0], [5.0]]).unwrap();
        assert_eq!(matmul(&r, &c).unwrap().data(), &[2.0]);
    }

    #[test]
    fn matmul_rejects_inner_mismatch() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        assert!(matches!(matmul(&a, &b), Err(Error::Shape { .. })));
    }

    #[test]
    fn elementwise_basics() {
        let x = Tensor::vector(vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let h = Tensor::vector(vec![0.5]).unwrap();
        assert!(close(log(&exp(&h).unwrap()).unwrap().data(), &[0.5], 1e-15));
        assert!(matches!(log(&x), Err(Error::Domain { .. })));
        assert!(matches!(exp(&Tensor::scalar(1e4)), Err(Error::NonFinite(_))));
    }

    #[test]
    fn softmax_examples() {
        let u = row_softmax(&Tensor::from_rows(&[[0.0, 0.0, 0.0]]).unwrap()).unwrap();
        assert!(close(u.data(), &[1.0 / 3.0; 3], 1e-15));

        let l = Tensor::from_rows(&[[1f64.ln(), 2f64.ln(), 3f64.ln()]]).unwrap();
        let p = row_softmax(&l).unwrap();
        assert!(close(p.data(), &[1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0], 1e-15));

        let big = row_softmax(&Tensor::from_rows(&[[1000.0, 1000.0, 999.0]]).unwrap()).unwrap();
        assert!(big.all_finite());
        assert!((big.sum() - 1.0).abs() < 1e-12);

        let nan = Tensor::from_rows(&[[0.0, f64::NAN]]).unwrap();
        assert!(matches!(row_softmax(&nan), Err(Error::Domain { .. })));
    }

    #[test]
    fn distance_examples() {
        let z = Tensor::from_rows(&[[0.0, 0.0]]).unwrap();
        let c = Tensor::from_rows(&[[3.0, 4.0]]).unwrap();
        assert!((row_l2_distance(&z, &c).unwrap().data()[0] - 5.0).abs() < 1e-6);
        let at = row_l2_distance(&c, &c).unwrap().data()[0];
        assert!((at - 1e-6).abs() < 1e-15);
        let bad = Tensor::zeros(&[1, 3]);
        assert!(row_l2_distance(&z, &bad).is_err());
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_sim(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_sim(&[1.0, 1.0], &[-1.0, -1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(cosine_sim(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::Degenerate(_))));
    }
}
