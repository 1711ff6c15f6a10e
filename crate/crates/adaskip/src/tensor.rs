//! Dense numeric kernels used by the runtime and profiler.
//!
//! Everything here is a pure function over plain `f64` buffers. Accumulation
//! is always in 64-bit floats so that similarity statistics stay stable
//! enough to rank sublayers whose means differ by less than 0.01.

use crate::error::{Error, Result};

/// Row-major dense matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: length mismatch");
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Euclidean norm, `sqrt(sum a_i^2)`.
pub fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity between two equal-length vectors, clamped to [-1, 1]
/// so rounding never breaks downstream sort invariants.
///
/// A zero-norm input is an explicit error: a zero activation indicates a
/// runtime bug, not low importance.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    assert_eq!(a.len(), b.len(), "cosine_similarity: length mismatch");
    assert!(!a.is_empty(), "cosine_similarity: empty vectors");
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateInput(
            "cosine similarity of a zero-norm vector".to_string(),
        ));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Elementwise `s * a_i`.
pub fn scale_vector(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

/// Dense matrix product.
pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols, b.rows, "matmul: shape mismatch");
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for j in 0..b.cols {
                orow[j] += aik * brow[j];
            }
        }
    }
    out
}

/// Matrix-vector product `A x`.
pub fn matvec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.cols, x.len(), "matvec: shape mismatch");
    let mut out = vec![0.0; a.rows];
    for i in 0..a.rows {
        out[i] = dot(a.row(i), x);
    }
    out
}

/// Numerically stable softmax over a slice, in place.
pub fn softmax_in_place(row: &mut [f64]) {
    assert!(!row.is_empty(), "softmax: empty row");
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Row-wise softmax.
pub fn softmax_rows(a: &Matrix) -> Matrix {
    let mut out = a.clone();
    for r in 0..out.rows {
        softmax_in_place(&mut out.data[r * out.cols..(r + 1) * out.cols]);
    }
    out
}

/// RMS normalization: divide by `sqrt(mean(a^2) + eps)`, then apply the gain.
pub fn rms_norm(a: &[f64], gain: &[f64], eps: f64) -> Vec<f64> {
    assert_eq!(a.len(), gain.len(), "rms_norm: gain length mismatch");
    assert!(eps > 0.0, "rms_norm: eps must be positive");
    let mean_sq = dot(a, a) / a.len() as f64;
    let inv = 1.0 / (mean_sq + eps).sqrt();
    a.iter().zip(gain).map(|(x, g)| g * x * inv).collect()
}

/// Smooth gating nonlinearity `x * sigmoid(x)`.
pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}
