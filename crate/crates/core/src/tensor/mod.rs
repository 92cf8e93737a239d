//! Dense numerics core.
//!
//! Everything the classifiers need and nothing more: a rank-1/rank-2
//! [`Tensor`], matrix-vector kernels used by the forward and backward passes,
//! the nonlinearities, max-pooling over time, inverted dropout, a seeded
//! [`Rng`], named parameter storage ([`ParamStore`], [`Grads`]) and a
//! central-difference gradient checker.
//!
//! Shape mismatches are programming errors and panic. Bad configuration
//! values (a dropout probability outside `[0, 1)`) are reported as
//! [`TensorError`].

mod gradcheck;
mod params;
mod rng;

pub use gradcheck::{grad_check, GradCheckError, GradCheckReport};
pub use params::{Grad, Grads, ParamId, ParamStore};
pub use rng::Rng;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("dropout probability must lie in [0, 1), got {0}")]
    DropoutProbability(f64),
}

/// A dense row-major tensor of rank 1 or 2.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        assert!(
            shape.len() == 1 || shape.len() == 2,
            "only rank 1 and rank 2 tensors are supported, got shape {shape:?}"
        );
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        let n: usize = shape.iter().product();
        assert_eq!(n, data.len(), "shape {shape:?} does not match {} values", data.len());
        assert!(shape.len() == 1 || shape.len() == 2);
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        let n = data.len();
        Tensor { shape: vec![n], data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Self::from_vec(&[rows, cols], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Uniform initialization on `[-r, r]`.
    pub fn uniform(shape: &[usize], r: f64, rng: &mut Rng) -> Self {
        let mut t = Self::zeros(shape);
        for v in &mut t.data {
            *v = rng.uniform(-r, r);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns; 1 for vectors.
    pub fn cols(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Rounds every value to the nearest 32-bit float.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.data {
            *v = *v as f32 as f64;
        }
    }
}

/// `W x + b`.
pub fn linear(x: &[f64], w: &Tensor, b: &[f64]) -> Vec<f64> {
    assert_eq!(w.shape().len(), 2, "linear weight must be a matrix");
    assert_eq!(w.rows(), b.len(), "bias length {} != output size {}", b.len(), w.rows());
    let mut out = b.to_vec();
    matvec_acc(w, x, &mut out);
    out
}

/// `out += W x`.
pub fn matvec_acc(w: &Tensor, x: &[f64], out: &mut [f64]) {
    let cols = w.cols();
    assert_eq!(cols, x.len(), "input length {} != weight columns {cols}", x.len());
    assert_eq!(w.rows(), out.len(), "output length {} != weight rows {}", out.len(), w.rows());
    for (o, row) in out.iter_mut().zip(w.as_slice().chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `dx += Wᵀ dy`.
pub fn matvec_t_acc(w: &Tensor, dy: &[f64], dx: &mut [f64]) {
    let cols = w.cols();
    assert_eq!(cols, dx.len());
    assert_eq!(w.rows(), dy.len());
    for (&g, row) in dy.iter().zip(w.as_slice().chunks_exact(cols)) {
        if g == 0.0 {
            continue;
        }
        for (d, &wv) in dx.iter_mut().zip(row) {
            *d += g * wv;
        }
    }
}

/// `dW += dy xᵀ`.
pub fn outer_acc(dw: &mut Tensor, dy: &[f64], x: &[f64]) {
    let cols = dw.cols();
    assert_eq!(cols, x.len());
    assert_eq!(dw.rows(), dy.len());
    for (&g, row) in dy.iter().zip(dw.as_mut_slice().chunks_exact_mut(cols)) {
        if g == 0.0 {
            continue;
        }
        for (d, &xv) in row.iter_mut().zip(x) {
            *d += g * xv;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// `acc += x`.
pub fn add_assign(acc: &mut [f64], x: &[f64]) {
    assert_eq!(acc.len(), x.len());
    acc.iter_mut().zip(x).for_each(|(a, b)| *a += b);
}

pub fn concat(parts: &[&[f64]]) -> Vec<f64> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn tanh(x: f64) -> f64 {
    x.tanh()
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "softmax of an empty vector");
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Pulls a gradient on softmax outputs back to the logits.
pub fn softmax_backward(probs: &[f64], d_probs: &[f64]) -> Vec<f64> {
    assert_eq!(probs.len(), d_probs.len());
    let inner = dot(probs, d_probs);
    probs.iter().zip(d_probs).map(|(p, g)| p * (g - inner)).collect()
}

/// Elementwise max over the time axis of a `T × d` sequence.
///
/// Also returns, for every column, the row that produced the maximum (the
/// earliest row on ties), which is where the backward pass routes gradient.
pub fn maxpool_over_time(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    assert!(!rows.is_empty(), "maxpool over an empty sequence");
    let d = rows[0].len();
    let mut out = rows[0].clone();
    let mut arg = vec![0; d];
    for (t, row) in rows.iter().enumerate().skip(1) {
        assert_eq!(row.len(), d, "ragged sequence in maxpool");
        for j in 0..d {
            if row[j] > out[j] {
                out[j] = row[j];
                arg[j] = t;
            }
        }
    }
    (out, arg)
}

/// Same as [`maxpool_over_time`] on a `T × d` matrix.
pub fn maxpool_matrix(h: &Tensor) -> Vec<f64> {
    assert!(h.rows() > 0, "maxpool over an empty sequence");
    let rows: Vec<Vec<f64>> = (0..h.rows()).map(|i| h.row(i).to_vec()).collect();
    maxpool_over_time(&rows).0
}

/// Inverted dropout.
///
/// Returns the output and the multiplicative mask that produced it (each
/// entry `0` or `1/(1-p)`); in evaluation mode, or with `p == 0`, the mask is
/// all ones and no randomness is drawn.
pub fn dropout(
    x: &[f64],
    p: f64,
    training: bool,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<f64>), TensorError> {
    let mask = dropout_mask(x.len(), p, training, rng)?;
    Ok((mul(x, &mask), mask))
}

pub fn dropout_mask(
    n: usize,
    p: f64,
    training: bool,
    rng: &mut Rng,
) -> Result<Vec<f64>, TensorError> {
    if !(0.0..1.0).contains(&p) {
        return Err(TensorError::DropoutProbability(p));
    }
    if !training || p == 0.0 {
        return Ok(vec![1.0; n]);
    }
    let keep = 1.0 / (1.0 - p);
    Ok((0..n).map(|_| if rng.bernoulli(p) { 0.0 } else { keep }).collect())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    assert!(!v.is_empty());
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
