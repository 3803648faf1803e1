use rand::Rng;

use crate::tensor::gemm;
use crate::{Matrix, Module, NnError, Param, Result};

/// Fully connected layer, `y = x W^T + b` with `W` stored `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
}

#[derive(Debug, Clone)]
pub struct LinearCache {
    input: Matrix,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(name: &str, inputs: usize, outputs: usize, gain: f32, rng: &mut R) -> Self {
        Self {
            weight: Param::kaiming(format!("{name}.weight"), vec![outputs, inputs], inputs, gain, rng),
            bias: Param::zeros(format!("{name}.bias"), vec![outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols != self.inputs() {
            return Err(NnError::Shape(format!("linear expects {} inputs, got {}", self.inputs(), x.cols)));
        }
        let out_dim = self.outputs();
        let mut y = Matrix::zeros(x.rows, out_dim);
        for row in y.data.chunks_mut(out_dim) {
            row.copy_from_slice(&self.bias.value);
        }
        gemm(x.rows, out_dim, x.cols, &x.data, false, &self.weight.value, true, &mut y.data, 1.0);
        Ok(y)
    }

    pub fn forward_train(&self, x: &Matrix) -> Result<(Matrix, LinearCache)> {
        Ok((self.forward(x)?, LinearCache { input: x.clone() }))
    }

    pub fn backward(&mut self, cache: &LinearCache, dy: &Matrix) -> Matrix {
        let x = &cache.input;
        let out_dim = self.outputs();
        gemm(out_dim, x.cols, x.rows, &dy.data, true, &x.data, false, &mut self.weight.grad, 1.0);
        for row in dy.data.chunks(out_dim) {
            for (g, v) in self.bias.grad.iter_mut().zip(row) {
                *g += v;
            }
        }
        let mut dx = Matrix::zeros(x.rows, x.cols);
        gemm(x.rows, x.cols, out_dim, &dy.data, false, &self.weight.value, false, &mut dx.data, 0.0);
        dx
    }
}

impl Module for Linear {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Linear layers separated by ReLU (none after the last layer).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    linear: Vec<LinearCache>,
    // post-ReLU outputs of hidden layers
    hidden: Vec<Matrix>,
}

impl Mlp {
    /// `dims = [input, hidden..., output]`.
    pub fn new<R: Rng + ?Sized>(name: &str, dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output sizes");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| Linear::new(&format!("{name}.{i}"), d[0], d[1], 1.0, rng))
            .collect();
        Self { layers }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Linear::outputs)
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h)?;
            if i + 1 < self.layers.len() {
                relu_inplace(&mut h.data);
            }
        }
        Ok(h)
    }

    pub fn forward_train(&self, x: &Matrix) -> Result<(Matrix, MlpCache)> {
        let mut cache = MlpCache { linear: Vec::new(), hidden: Vec::new() };
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let (out, c) = layer.forward_train(&h)?;
            cache.linear.push(c);
            h = out;
            if i + 1 < self.layers.len() {
                relu_inplace(&mut h.data);
                cache.hidden.push(h.clone());
            }
        }
        Ok((h, cache))
    }

    pub fn backward(&mut self, cache: &MlpCache, dy: &Matrix) -> Matrix {
        let mut grad = dy.clone();
        for i in (0..self.layers.len()).rev() {
            if i + 1 < self.layers.len() {
                relu_backward(&cache.hidden[i].data, &mut grad.data);
            }
            grad = self.layers[i].backward(&cache.linear[i], &grad);
        }
        grad
    }
}

impl Module for Mlp {
    fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}

pub(crate) fn relu_inplace(v: &mut [f32]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

/// Masks `grad` where the ReLU output was not positive.
pub(crate) fn relu_backward(output: &[f32], grad: &mut [f32]) {
    for (g, &y) in grad.iter_mut().zip(output) {
        if y <= 0.0 {
            *g = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mlp_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut mlp = Mlp::new("m", &[4, 6, 3], &mut rng);
        let x = Matrix::from_vec(2, 4, (0..8).map(|i| (i as f32 * 0.37).cos()).collect()).unwrap();
        let w: Vec<f32> = (0..6).map(|i| i as f32 * 0.3 - 0.8).collect();
        let (y, cache) = mlp.forward_train(&x).unwrap();
        let dy = Matrix::from_vec(y.rows, y.cols, w.clone()).unwrap();
        let dx = mlp.backward(&cache, &dy);
        let objective = |m: &Mlp, x: &Matrix| -> f64 {
            m.forward(x).unwrap().data.iter().zip(&w).map(|(a, b)| (*a as f64) * (*b as f64)).sum()
        };
        let h = 1e-2f32;
        for idx in 0..8 {
            let mut xp = x.clone();
            xp.data[idx] += h;
            let mut xm = x.clone();
            xm.data[idx] -= h;
            let numeric = (objective(&mlp, &xp) - objective(&mlp, &xm)) / (2.0 * h as f64);
            assert!((numeric - dx.data[idx] as f64).abs() < 2e-3, "input {idx}: {numeric} vs {}", dx.data[idx]);
        }
        for idx in [0usize, 7, 13, 23] {
            let mut mp = mlp.clone();
            mp.layers[0].weight.value[idx] += h;
            let mut mm = mlp.clone();
            mm.layers[0].weight.value[idx] -= h;
            let numeric = (objective(&mp, &x) - objective(&mm, &x)) / (2.0 * h as f64);
            assert!((numeric - mlp.layers[0].weight.grad[idx] as f64).abs() < 2e-3);
        }
    }

    #[test]
    fn linear_rejects_wrong_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l = Linear::new("l", 3, 2, 1.0, &mut rng);
        assert!(l.forward(&Matrix::zeros(1, 4)).is_err());
    }
}
