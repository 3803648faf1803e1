use rand::Rng;

use crate::tensor::gemm;
use crate::{Module, NnError, Param, Result, Tensor4};

/// Square-kernel 2-D convolution with zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub weight: Param,
    pub bias: Param,
}

/// Saved activations of a training forward pass.
#[derive(Debug, Clone)]
pub struct ConvCache {
    cols: Vec<f32>,
    input_shape: (usize, usize, usize, usize),
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        gain: f32,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weight: Param::kaiming(format!("{name}.weight"), vec![out_channels, fan_in], fan_in, gain, rng),
            bias: Param::zeros(format!("{name}.bias"), vec![out_channels]),
        }
    }

    pub fn output_size(&self, input: usize) -> usize {
        (input + 2 * self.padding - self.kernel) / self.stride + 1
    }

    fn check(&self, x: &Tensor4) -> Result<()> {
        if x.c != self.in_channels || x.h != x.w || x.h + 2 * self.padding < self.kernel {
            return Err(NnError::Shape(format!(
                "conv expects {} square channels, got {}x{}x{}",
                self.in_channels, x.c, x.h, x.w
            )));
        }
        Ok(())
    }

    fn im2col(&self, x: &Tensor4) -> Vec<f32> {
        let (k, s, p) = (self.kernel, self.stride, self.padding);
        let (ho, wo) = (self.output_size(x.h), self.output_size(x.w));
        let l = x.n * ho * wo;
        let mut cols = vec![0.0f32; self.in_channels * k * k * l];
        for c in 0..x.c {
            for ki in 0..k {
                for kj in 0..k {
                    let row = (c * k + ki) * k + kj;
                    let dst_row = &mut cols[row * l..(row + 1) * l];
                    for n in 0..x.n {
                        let src = &x.data[(c * x.n + n) * x.h * x.w..][..x.h * x.w];
                        for oy in 0..ho {
                            let iy = (oy * s + ki) as isize - p as isize;
                            if iy < 0 || iy >= x.h as isize {
                                continue;
                            }
                            let src_row = &src[iy as usize * x.w..][..x.w];
                            let dst = &mut dst_row[(n * ho + oy) * wo..][..wo];
                            for (ox, d) in dst.iter_mut().enumerate() {
                                let ix = (ox * s + kj) as isize - p as isize;
                                if ix >= 0 && ix < x.w as isize {
                                    *d = src_row[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f32], shape: (usize, usize, usize, usize)) -> Tensor4 {
        let (c_in, n_in, h, w) = shape;
        let (k, s, p) = (self.kernel, self.stride, self.padding);
        let (ho, wo) = (self.output_size(h), self.output_size(w));
        let l = n_in * ho * wo;
        let mut dx = Tensor4::zeros(c_in, n_in, h, w);
        for c in 0..c_in {
            for ki in 0..k {
                for kj in 0..k {
                    let row = (c * k + ki) * k + kj;
                    let src_row = &cols[row * l..(row + 1) * l];
                    for n in 0..n_in {
                        let dst = &mut dx.data[(c * n_in + n) * h * w..][..h * w];
                        for oy in 0..ho {
                            let iy = (oy * s + ki) as isize - p as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let src = &src_row[(n * ho + oy) * wo..][..wo];
                            for (ox, &g) in src.iter().enumerate() {
                                let ix = (ox * s + kj) as isize - p as isize;
                                if ix >= 0 && ix < w as isize {
                                    dst[iy as usize * w + ix as usize] += g;
                                }
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    fn apply(&self, x: &Tensor4, cols: &[f32]) -> Tensor4 {
        let (ho, wo) = (self.output_size(x.h), self.output_size(x.w));
        let l = x.n * ho * wo;
        let mut out = Tensor4::zeros(self.out_channels, x.n, ho, wo);
        for (row, &b) in out.data.chunks_mut(l).zip(&self.bias.value) {
            row.iter_mut().for_each(|v| *v = b);
        }
        let kk = self.in_channels * self.kernel * self.kernel;
        gemm(self.out_channels, l, kk, &self.weight.value, false, cols, false, &mut out.data, 1.0);
        out
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        self.check(x)?;
        let cols = self.im2col(x);
        Ok(self.apply(x, &cols))
    }

    pub fn forward_train(&self, x: &Tensor4) -> Result<(Tensor4, ConvCache)> {
        self.check(x)?;
        let cols = self.im2col(x);
        let out = self.apply(x, &cols);
        Ok((out, ConvCache { cols, input_shape: (x.c, x.n, x.h, x.w) }))
    }

    /// Accumulates weight and bias gradients; returns the input gradient
    /// when `input_grad` is set.
    pub fn backward(&mut self, cache: &ConvCache, dy: &Tensor4, input_grad: bool) -> Option<Tensor4> {
        let kk = self.in_channels * self.kernel * self.kernel;
        let l = dy.n * dy.h * dy.w;
        gemm(self.out_channels, kk, l, &dy.data, false, &cache.cols, true, &mut self.weight.grad, 1.0);
        for (g, row) in self.bias.grad.iter_mut().zip(dy.data.chunks(l)) {
            *g += row.iter().sum::<f32>();
        }
        if !input_grad {
            return None;
        }
        let mut dcols = vec![0.0f32; kk * l];
        gemm(kk, l, self.out_channels, &self.weight.value, true, &dy.data, false, &mut dcols, 0.0);
        Some(self.col2im(&dcols, cache.input_shape))
    }
}

impl Module for Conv2d {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_conv(conv: &Conv2d, x: &Tensor4) -> Tensor4 {
        let (k, s, p) = (conv.kernel, conv.stride, conv.padding);
        let ho = conv.output_size(x.h);
        let mut out = Tensor4::zeros(conv.out_channels, x.n, ho, ho);
        for o in 0..conv.out_channels {
            for n in 0..x.n {
                for oy in 0..ho {
                    for ox in 0..ho {
                        let mut acc = conv.bias.value[o];
                        for c in 0..x.c {
                            for ki in 0..k {
                                for kj in 0..k {
                                    let iy = (oy * s + ki) as isize - p as isize;
                                    let ix = (ox * s + kj) as isize - p as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < x.h && (ix as usize) < x.w {
                                        let wv = conv.weight.value[o * x.c * k * k + (c * k + ki) * k + kj];
                                        acc += wv * x.data[((c * x.n + n) * x.h + iy as usize) * x.w + ix as usize];
                                    }
                                }
                            }
                        }
                        out.data[((o * x.n + n) * ho + oy) * ho + ox] = acc;
                    }
                }
            }
        }
        out
    }

    fn random_input(rng: &mut ChaCha8Rng, c: usize, n: usize, s: usize) -> Tensor4 {
        let mut x = Tensor4::zeros(c, n, s, s);
        x.data.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        x
    }

    #[test]
    fn forward_matches_naive_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (stride, pad) in [(1, 1), (2, 1), (1, 0), (2, 0)] {
            let mut conv = Conv2d::new("c", 3, 4, 3, stride, pad, 1.0, &mut rng);
            conv.bias.value.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
            let x = random_input(&mut rng, 3, 2, 7);
            let fast = conv.forward(&x).unwrap();
            let slow = naive_conv(&conv, &x);
            assert!(fast.same_shape(&slow));
            for (a, b) in fast.data.iter().zip(&slow.data) {
                assert!((a - b).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut conv = Conv2d::new("c", 2, 3, 3, 2, 1, 1.0, &mut rng);
        let x = random_input(&mut rng, 2, 2, 5);
        let (y, cache) = conv.forward_train(&x).unwrap();
        // objective: sum(w_o * y)
        let weights: Vec<f32> = (0..y.data.len()).map(|i| ((i * 7 % 11) as f32 - 5.0) / 5.0).collect();
        let dy = Tensor4 { data: weights.clone(), ..y.clone() };
        let dx = conv.backward(&cache, &dy, true).unwrap();
        let objective = |conv: &Conv2d, x: &Tensor4| -> f64 {
            conv.forward(x).unwrap().data.iter().zip(&weights).map(|(a, b)| (*a as f64) * (*b as f64)).sum()
        };
        let h = 1e-2f32;
        for idx in [0usize, 5, 17, 33] {
            let mut xp = x.clone();
            xp.data[idx] += h;
            let mut xm = x.clone();
            xm.data[idx] -= h;
            let numeric = (objective(&conv, &xp) - objective(&conv, &xm)) / (2.0 * h as f64);
            assert!((numeric - dx.data[idx] as f64).abs() < 1e-3, "input {idx}");
        }
        for idx in [0usize, 9, 20, 53] {
            let mut cp = conv.clone();
            cp.weight.value[idx] += h;
            let mut cm = conv.clone();
            cm.weight.value[idx] -= h;
            let numeric = (objective(&cp, &x) - objective(&cm, &x)) / (2.0 * h as f64);
            assert!((numeric - conv.weight.grad[idx] as f64).abs() < 1e-3, "weight {idx}");
        }
        let bias_numeric: f64 = {
            let mut cp = conv.clone();
            cp.bias.value[1] += h;
            let mut cm = conv.clone();
            cm.bias.value[1] -= h;
            (objective(&cp, &x) - objective(&cm, &x)) / (2.0 * h as f64)
        };
        assert!((bias_numeric - conv.bias.grad[1] as f64).abs() < 1e-3);
    }
}
