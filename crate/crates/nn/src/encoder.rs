use pnda_core::ImageSample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conv::{Conv2d, ConvCache};
use crate::linear::{relu_backward, relu_inplace};
use crate::{images_to_tensor, Matrix, Module, NnError, Param, Result, Tensor4};

/// Encoder architecture. Both variants end in global average pooling, so the
/// feature width is the last stage's channel count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderSpec {
    /// Stride-2 3x3 convolutions, each followed by ReLU.
    Conv { channels: Vec<usize> },
    /// 3x3 stride-1 stem, then stages of two-convolution residual blocks;
    /// every stage after the first halves the resolution.
    Resnet { stem: usize, widths: Vec<usize>, blocks: Vec<usize> },
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec::Conv { channels: vec![32, 64, 128, 128] }
    }
}

impl EncoderSpec {
    /// ResNet-18 widths on a CIFAR-style stem.
    pub fn resnet18() -> Self {
        EncoderSpec::Resnet { stem: 64, widths: vec![64, 128, 256, 512], blocks: vec![2, 2, 2, 2] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EncoderSpec::Conv { channels } if channels.is_empty() || channels.contains(&0) => {
                Err(NnError::Config("conv encoder needs at least one non-zero channel count".into()))
            }
            EncoderSpec::Resnet { stem, widths, blocks } => {
                if *stem == 0 || widths.is_empty() || widths.len() != blocks.len() || widths.contains(&0) || blocks.contains(&0) {
                    Err(NnError::Config("resnet encoder needs matching non-zero widths and block counts".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            EncoderSpec::Conv { channels } => *channels.last().unwrap_or(&0),
            EncoderSpec::Resnet { widths, .. } => *widths.last().unwrap_or(&0),
        }
    }

    /// Short human-readable tag, e.g. `conv-32-64` or `resnet-64x2-128x2`.
    pub fn tag(&self) -> String {
        match self {
            EncoderSpec::Conv { channels } => {
                format!("conv-{}", channels.iter().map(usize::to_string).collect::<Vec<_>>().join("-"))
            }
            EncoderSpec::Resnet { widths, blocks, .. } => format!(
                "resnet-{}",
                widths.iter().zip(blocks).map(|(w, b)| format!("{w}x{b}")).collect::<Vec<_>>().join("-")
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ResBlock {
    conv1: Conv2d,
    conv2: Conv2d,
    shortcut: Option<Conv2d>,
}

#[derive(Debug, Clone, PartialEq)]
enum Stage {
    ConvRelu(Conv2d),
    Residual(ResBlock),
}

#[derive(Debug, Clone)]
enum StageCache {
    ConvRelu { conv: ConvCache, out: Tensor4 },
    Residual { c1: ConvCache, h1: Tensor4, c2: ConvCache, shortcut: Option<ConvCache>, out: Tensor4 },
}

/// Saved state of [`Encoder::forward_train`].
#[derive(Debug, Clone)]
pub struct EncoderCache {
    stages: Vec<StageCache>,
    pooled: (usize, usize, usize, usize),
}

/// Convolutional feature extractor with global average pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    spec: EncoderSpec,
    in_channels: usize,
    stages: Vec<Stage>,
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(spec: &EncoderSpec, in_channels: usize, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut stages = Vec::new();
        match spec {
            EncoderSpec::Conv { channels } => {
                let mut c_in = in_channels;
                for (i, &c) in channels.iter().enumerate() {
                    stages.push(Stage::ConvRelu(Conv2d::new(&format!("enc.conv{i}"), c_in, c, 3, 2, 1, 1.0, rng)));
                    c_in = c;
                }
            }
            EncoderSpec::Resnet { stem, widths, blocks } => {
                stages.push(Stage::ConvRelu(Conv2d::new("enc.stem", in_channels, *stem, 3, 1, 1, 1.0, rng)));
                let mut c_in = *stem;
                for (s, (&w, &n)) in widths.iter().zip(blocks).enumerate() {
                    for b in 0..n {
                        let stride = if s > 0 && b == 0 { 2 } else { 1 };
                        let name = format!("enc.layer{s}.{b}");
                        let shortcut = (stride != 1 || c_in != w)
                            .then(|| Conv2d::new(&format!("{name}.shortcut"), c_in, w, 1, stride, 0, 1.0, rng));
                        // Residual branches start near zero so the block is close to identity.
                        stages.push(Stage::Residual(ResBlock {
                            conv1: Conv2d::new(&format!("{name}.conv1"), c_in, w, 3, stride, 1, 1.0, rng),
                            conv2: Conv2d::new(&format!("{name}.conv2"), w, w, 3, 1, 1, 0.1, rng),
                            shortcut,
                        }));
                        c_in = w;
                    }
                }
            }
        }
        Ok(Self { spec: spec.clone(), in_channels, stages })
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Matrix> {
        let mut h = x.clone();
        for stage in &self.stages {
            h = match stage {
                Stage::ConvRelu(conv) => {
                    let mut y = conv.forward(&h)?;
                    relu_inplace(&mut y.data);
                    y
                }
                Stage::Residual(block) => {
                    let mut h1 = block.conv1.forward(&h)?;
                    relu_inplace(&mut h1.data);
                    let mut y = block.conv2.forward(&h1)?;
                    add_shortcut(&mut y, &h, block.shortcut.as_ref().map(|s| s.forward(&h)).transpose()?.as_ref())?;
                    relu_inplace(&mut y.data);
                    y
                }
            };
        }
        Ok(global_avg_pool(&h))
    }

    pub fn forward_train(&self, x: &Tensor4) -> Result<(Matrix, EncoderCache)> {
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            match stage {
                Stage::ConvRelu(conv) => {
                    let (mut y, c) = conv.forward_train(&h)?;
                    relu_inplace(&mut y.data);
                    caches.push(StageCache::ConvRelu { conv: c, out: y.clone() });
                    h = y;
                }
                Stage::Residual(block) => {
                    let (mut h1, c1) = block.conv1.forward_train(&h)?;
                    relu_inplace(&mut h1.data);
                    let (mut y, c2) = block.conv2.forward_train(&h1)?;
                    let (sc_out, sc_cache) = match &block.shortcut {
                        Some(s) => {
                            let (o, c) = s.forward_train(&h)?;
                            (Some(o), Some(c))
                        }
                        None => (None, None),
                    };
                    add_shortcut(&mut y, &h, sc_out.as_ref())?;
                    relu_inplace(&mut y.data);
                    caches.push(StageCache::Residual { c1, h1, c2, shortcut: sc_cache, out: y.clone() });
                    h = y;
                }
            }
        }
        let pooled = (h.c, h.n, h.h, h.w);
        Ok((global_avg_pool(&h), EncoderCache { stages: caches, pooled }))
    }

    /// Accumulates parameter gradients for `d loss / d features`.
    pub fn backward(&mut self, cache: &EncoderCache, dfeat: &Matrix) -> Result<()> {
        let (c, n, h, w) = cache.pooled;
        if dfeat.rows != n || dfeat.cols != c {
            return Err(NnError::Shape(format!("feature gradient is {}x{}, expected {n}x{c}", dfeat.rows, dfeat.cols)));
        }
        let mut grad = Tensor4::zeros(c, n, h, w);
        let scale = 1.0 / (h * w) as f32;
        for ch in 0..c {
            for k in 0..n {
                let g = dfeat.data[k * c + ch] * scale;
                grad.data[(ch * n + k) * h * w..][..h * w].iter_mut().for_each(|v| *v = g);
            }
        }
        for (idx, (stage, sc)) in self.stages.iter_mut().zip(&cache.stages).enumerate().rev() {
            let need_input = idx > 0;
            match (stage, sc) {
                (Stage::ConvRelu(conv), StageCache::ConvRelu { conv: cc, out }) => {
                    relu_backward(&out.data, &mut grad.data);
                    match conv.backward(cc, &grad, need_input) {
                        Some(dx) => grad = dx,
                        None => return Ok(()),
                    }
                }
                (Stage::Residual(block), StageCache::Residual { c1, h1, c2, shortcut, out }) => {
                    relu_backward(&out.data, &mut grad.data);
                    let mut dh1 = block.conv2.backward(c2, &grad, true).expect("input grad requested");
                    relu_backward(&h1.data, &mut dh1.data);
                    let dx_main = block.conv1.backward(c1, &dh1, true).expect("input grad requested");
                    let dx_skip = match (&mut block.shortcut, shortcut) {
                        (Some(s), Some(scache)) => s.backward(scache, &grad, true).expect("input grad requested"),
                        _ => grad,
                    };
                    let mut dx = dx_main;
                    for (a, b) in dx.data.iter_mut().zip(&dx_skip.data) {
                        *a += b;
                    }
                    grad = dx;
                }
                _ => unreachable!("cache layout follows stage layout"),
            }
        }
        Ok(())
    }

    /// Inference over a list of images in chunks of `batch`.
    pub fn embed_images(&self, images: &[ImageSample], batch: usize) -> Result<Matrix> {
        let mut parts = Vec::new();
        for chunk in images.chunks(batch.max(1)) {
            parts.push(self.forward(&images_to_tensor(chunk)?)?);
        }
        let refs: Vec<&Matrix> = parts.iter().collect();
        if refs.is_empty() {
            return Ok(Matrix::zeros(0, self.output_dim()));
        }
        Matrix::vstack(&refs)
    }
}

fn add_shortcut(y: &mut Tensor4, input: &Tensor4, projected: Option<&Tensor4>) -> Result<()> {
    let skip = projected.unwrap_or(input);
    if !y.same_shape(skip) {
        return Err(NnError::Shape("residual shortcut shape mismatch".into()));
    }
    for (a, b) in y.data.iter_mut().zip(&skip.data) {
        *a += b;
    }
    Ok(())
}

fn global_avg_pool(x: &Tensor4) -> Matrix {
    let plane = x.h * x.w;
    let mut out = Matrix::zeros(x.n, x.c);
    for c in 0..x.c {
        for n in 0..x.n {
            let s: f32 = x.data[(c * x.n + n) * plane..][..plane].iter().sum();
            out.data[n * x.c + c] = s / plane as f32;
        }
    }
    out
}

impl Module for Encoder {
    fn params(&self) -> Vec<&Param> {
        self.stages
            .iter()
            .flat_map(|s| match s {
                Stage::ConvRelu(c) => c.params(),
                Stage::Residual(b) => {
                    let mut p = b.conv1.params();
                    p.extend(b.conv2.params());
                    if let Some(s) = &b.shortcut {
                        p.extend(s.params());
                    }
                    p
                }
            })
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.stages
            .iter_mut()
            .flat_map(|s| match s {
                Stage::ConvRelu(c) => c.params_mut(),
                Stage::Residual(b) => {
                    let mut p = b.conv1.params_mut();
                    p.extend(b.conv2.params_mut());
                    if let Some(s) = &mut b.shortcut {
                        p.extend(s.params_mut());
                    }
                    p
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn input(rng: &mut ChaCha8Rng, n: usize, s: usize) -> Tensor4 {
        let mut x = Tensor4::zeros(3, n, s, s);
        x.data.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
        x
    }

    fn check_backward(spec: EncoderSpec) {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut enc = Encoder::new(&spec, 3, &mut rng).unwrap();
        let x = input(&mut rng, 2, 8);
        let (feat, cache) = enc.forward_train(&x).unwrap();
        assert_eq!((feat.rows, feat.cols), (2, spec.output_dim()));
        let w: Vec<f32> = (0..feat.data.len()).map(|i| ((i % 5) as f32 - 2.0) * 0.5).collect();
        enc.backward(&cache, &Matrix::from_vec(feat.rows, feat.cols, w.clone()).unwrap()).unwrap();
        let objective = |e: &Encoder| -> f64 {
            e.forward(&x).unwrap().data.iter().zip(&w).map(|(a, b)| (*a as f64) * (*b as f64)).sum()
        };
        let h = 2e-3f32;
        let n_params = enc.params().len();
        for p in 0..n_params {
            let len = enc.params()[p].len();
            for idx in [0, len / 2, len - 1] {
                let mut plus = enc.clone();
                plus.params_mut()[p].value[idx] += h;
                let mut minus = enc.clone();
                minus.params_mut()[p].value[idx] -= h;
                let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h as f64);
                let analytic = enc.params()[p].grad[idx] as f64;
                assert!(
                    (numeric - analytic).abs() < 5e-3 + 0.05 * analytic.abs(),
                    "{} [{idx}]: numeric {numeric} analytic {analytic}",
                    enc.params()[p].name
                );
            }
        }
    }

    #[test]
    fn conv_encoder_gradients() {
        check_backward(EncoderSpec::Conv { channels: vec![4, 6, 5] });
    }

    #[test]
    fn resnet_encoder_gradients() {
        check_backward(EncoderSpec::Resnet { stem: 4, widths: vec![4, 6], blocks: vec![1, 1] });
    }

    #[test]
    fn default_encoder_pools_to_last_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = Encoder::new(&EncoderSpec::default(), 3, &mut rng).unwrap();
        let f = enc.forward(&input(&mut rng, 3, 32)).unwrap();
        assert_eq!((f.rows, f.cols), (3, 128));
        assert_eq!(EncoderSpec::default().tag(), "conv-32-64-128-128");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(EncoderSpec::Conv { channels: vec![] }.validate().is_err());
        assert!(EncoderSpec::Resnet { stem: 8, widths: vec![8], blocks: vec![] }.validate().is_err());
        assert!(EncoderSpec::resnet18().validate().is_ok());
    }

    #[test]
    fn spec_serializes_with_kind_tag() {
        let json = serde_json::to_string(&EncoderSpec::Conv { channels: vec![8, 16] }).unwrap();
        assert_eq!(json, r#"{"kind":"conv","channels":[8,16]}"#);
        let back: EncoderSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, EncoderSpec::Conv { channels: vec![8, 16] });
    }
}
