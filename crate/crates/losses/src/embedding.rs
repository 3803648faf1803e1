use crate::{LossError, Result};

pub const UNIT_NORM_TOLERANCE: f64 = 1e-5;

/// A pool of L2-normalized embeddings stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingBatch {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(LossError::Dimension { expected: dim, actual: data.len() });
        }
        for (index, row) in data.chunks(dim).enumerate() {
            check_unit(index, row)?;
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(LossError::Dimension { expected: dim, actual: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    /// Normalizes raw rows; returns the batch and the pre-normalization norms.
    pub fn normalize(dim: usize, raw: &[f64]) -> Result<(Self, Vec<f64>)> {
        if dim == 0 || raw.len() % dim != 0 {
            return Err(LossError::Dimension { expected: dim, actual: raw.len() });
        }
        let (data, norms) = l2_normalize_rows(raw, dim);
        Ok((Self { dim, data }, norms))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub(crate) fn check_unit(index: usize, v: &[f64]) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(LossError::NotUnitNorm { index, norm });
    }
    Ok(())
}

const NORM_FLOOR: f64 = 1e-12;

/// Row-wise `x / max(|x|, 1e-12)`.
pub fn l2_normalize_rows(raw: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut out = Vec::with_capacity(raw.len());
    let mut norms = Vec::with_capacity(raw.len() / dim);
    for row in raw.chunks(dim) {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt().max(NORM_FLOOR);
        out.extend(row.iter().map(|x| x / norm));
        norms.push(norm);
    }
    (out, norms)
}

/// Pulls a gradient w.r.t. normalized rows back to the raw rows:
/// `dx = (dy - y (y . dy)) / |x|`.
pub fn l2_normalize_backward(normalized: &[f64], norms: &[f64], grad: &[f64], dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(grad.len());
    for ((y, dy), norm) in normalized.chunks(dim).zip(grad.chunks(dim)).zip(norms) {
        let proj: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
        out.extend(y.iter().zip(dy).map(|(yk, dk)| (dk - yk * proj) / norm));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_non_unit_rows() {
        assert!(EmbeddingBatch::new(2, vec![1.0, 0.0, 0.5, 0.5]).is_err());
        assert!(EmbeddingBatch::new(2, vec![1.0, 0.0, 0.0, 1.0]).is_ok());
        assert!(EmbeddingBatch::new(2, vec![1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn normalize_backward_matches_finite_differences() {
        let raw = vec![0.3, -1.2, 0.7, 2.0, 0.1, -0.4];
        let dim = 3;
        let weights = [0.5, -0.25, 1.5, 0.75, -1.0, 0.2];
        let objective = |x: &[f64]| -> f64 {
            let (y, _) = l2_normalize_rows(x, dim);
            y.iter().zip(&weights).map(|(a, b)| a * b).sum()
        };
        let (y, norms) = l2_normalize_rows(&raw, dim);
        let analytic = l2_normalize_backward(&y, &norms, &weights, dim);
        let h = 1e-6;
        for k in 0..raw.len() {
            let mut plus = raw.clone();
            let mut minus = raw.clone();
            plus[k] += h;
            minus[k] -= h;
            let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
            assert_abs_diff_eq!(analytic[k], numeric, epsilon = 1e-8);
        }
    }
}
