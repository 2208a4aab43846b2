//! Dense f64 tensors (vectors and matrices) used by the whole stack.

use serde::{Deserialize, Serialize};

use super::SubstrateError;

/// A dense, immutable-by-convention f64 array. Rank 1 (`[n]`) and rank 2
/// (`[rows, cols]`, row-major) cover every model in this crate; scalars are
/// shape `[1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, SubstrateError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(SubstrateError::ShapeMismatch {
                context: "Tensor::new",
                detail: format!("shape {:?} holds {} values, got {}", shape, n, data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self { shape: vec![data.len()], data }
    }

    pub fn scalar(x: f64) -> Self {
        Self { shape: vec![1], data: vec![x] }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, SubstrateError> {
        Self::new(vec![rows, cols], data)
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Scalar value of a shape-`[1]` tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.len(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
    }
}

/// `y = W x` for `W: [m, n]`, `x: [n]`.
pub fn matvec(w: &Tensor, x: &[f64], out: &mut [f64]) {
    let n = w.cols();
    debug_assert_eq!(x.len(), n);
    debug_assert_eq!(out.len(), w.rows());
    for (i, o) in out.iter_mut().enumerate() {
        let row = w.row(i);
        let mut acc = 0.0;
        for j in 0..n {
            acc += row[j] * x[j];
        }
        *o = acc;
    }
}

/// `y = W^T x` for `W: [m, n]`, `x: [m]`; accumulates into `out: [n]`.
pub fn matvec_t_accum(w: &Tensor, x: &[f64], out: &mut [f64]) {
    let n = w.cols();
    debug_assert_eq!(x.len(), w.rows());
    debug_assert_eq!(out.len(), n);
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = w.row(i);
        for j in 0..n {
            out[j] += row[j] * xi;
        }
    }
}
