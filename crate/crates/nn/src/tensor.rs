use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};
use pnda_core::ImageSample;

use crate::{NnError, Result};

/// Feature maps in `[C, N, H, W]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub c: usize,
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl Tensor4 {
    pub fn zeros(c: usize, n: usize, h: usize, w: usize) -> Self {
        Self { c, n, h, w, data: vec![0.0; c * n * h * w] }
    }

    pub fn same_shape(&self, other: &Tensor4) -> bool {
        (self.c, self.n, self.h, self.w) == (other.c, other.n, other.h, other.w)
    }
}

/// Stacks equally sized HWC images into a `[C, N, H, W]` tensor.
pub fn images_to_tensor<'a, I>(images: I) -> Result<Tensor4>
where
    I: IntoIterator<Item = &'a ImageSample>,
{
    let images: Vec<&ImageSample> = images.into_iter().collect();
    let first = images.first().ok_or_else(|| NnError::Shape("empty image batch".into()))?;
    let (s, c, n) = (first.size(), first.channels(), images.len());
    let mut t = Tensor4::zeros(c, n, s, s);
    let plane = s * s;
    for (k, img) in images.iter().enumerate() {
        if img.size() != s || img.channels() != c {
            return Err(NnError::Shape(format!(
                "image {} is {}x{}x{}, batch is {s}x{s}x{c}",
                img.id(),
                img.size(),
                img.size(),
                img.channels()
            )));
        }
        for (p, px) in img.pixels().chunks(c).enumerate() {
            for (ch, &v) in px.iter().enumerate() {
                t.data[(ch * n + k) * plane + p] = v;
            }
        }
    }
    Ok(t)
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NnError::Shape(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    pub fn from_f64(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&v| v as f32).collect())
    }

    /// Selects rows by index.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix { rows: rows.len(), cols: self.cols, data }
    }

    /// Vertical concatenation.
    pub fn vstack(parts: &[&Matrix]) -> Result<Matrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for m in parts {
            if m.cols != cols {
                return Err(NnError::Shape(format!("cannot stack {} and {cols} columns", m.cols)));
            }
            data.extend_from_slice(&m.data);
            rows += m.rows;
        }
        Ok(Matrix { rows, cols, data })
    }
}

/// `C = alpha * op(A) op(B) + beta * C` on row-major slices.
///
/// `a` is `m x k` (or `k x m` when `trans_a`), `b` is `k x n` (or `n x k`
/// when `trans_b`), `c` is `m x n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    n: usize,
    k: usize,
    a: &[f32],
    trans_a: bool,
    b: &[f32],
    trans_b: bool,
    c: &mut [f32],
    beta: f32,
) {
    let a = if trans_a {
        ArrayView2::from_shape((k, m), a).expect("gemm lhs shape").reversed_axes()
    } else {
        ArrayView2::from_shape((m, k), a).expect("gemm lhs shape")
    };
    let b = if trans_b {
        ArrayView2::from_shape((n, k), b).expect("gemm rhs shape").reversed_axes()
    } else {
        ArrayView2::from_shape((k, n), b).expect("gemm rhs shape")
    };
    let mut c = ArrayViewMut2::from_shape((m, n), c).expect("gemm output shape");
    general_mat_mul(1.0, &a, &b, beta, &mut c);
}
