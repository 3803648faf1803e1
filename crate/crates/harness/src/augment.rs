//! Two-view augmentation: random resized crop, horizontal flip, color jitter
//! and random grayscale, operating on HWC `f32` images in [0, 1].

use pnda_core::ImageSample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentRecipe {
    /// Crop area as a fraction of the image, `[min, max]`.
    pub crop_scale: [f64; 2],
    /// Crop aspect ratio range, `[min, max]`.
    pub crop_ratio: [f64; 2],
    pub flip_prob: f64,
    pub jitter_prob: f64,
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    /// Maximum hue shift as a fraction of the color wheel, at most 0.5.
    pub hue: f64,
    pub grayscale_prob: f64,
}

impl Default for AugmentRecipe {
    fn default() -> Self {
        Self {
            crop_scale: [0.2, 1.0],
            crop_ratio: [3.0 / 4.0, 4.0 / 3.0],
            flip_prob: 0.5,
            jitter_prob: 0.8,
            brightness: 0.4,
            contrast: 0.4,
            saturation: 0.4,
            hue: 0.1,
            grayscale_prob: 0.2,
        }
    }
}

impl AugmentRecipe {
    /// A recipe that returns its input unchanged.
    pub fn identity() -> Self {
        Self {
            crop_scale: [1.0, 1.0],
            crop_ratio: [1.0, 1.0],
            flip_prob: 0.0,
            jitter_prob: 0.0,
            brightness: 0.0,
            contrast: 0.0,
            saturation: 0.0,
            hue: 0.0,
            grayscale_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let ok = self.crop_scale[0] > 0.0
            && self.crop_scale[0] <= self.crop_scale[1]
            && self.crop_scale[1] <= 1.0
            && self.crop_ratio[0] > 0.0
            && self.crop_ratio[0] <= self.crop_ratio[1]
            && prob(self.flip_prob)
            && prob(self.jitter_prob)
            && prob(self.grayscale_prob)
            && (0.0..=1.0).contains(&self.brightness)
            && (0.0..=1.0).contains(&self.contrast)
            && (0.0..=1.0).contains(&self.saturation)
            && (0.0..=0.5).contains(&self.hue);
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Config(format!("invalid augmentation recipe: {self:?}")))
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Crop window `(top, left, height, width)` in source pixels.
fn crop_window<R: Rng + ?Sized>(n: usize, recipe: &AugmentRecipe, rng: &mut R) -> (f64, f64, f64, f64) {
    let area = (n * n) as f64;
    let (lr0, lr1) = (recipe.crop_ratio[0].ln(), recipe.crop_ratio[1].ln());
    for _ in 0..10 {
        let target = area * uniform(rng, recipe.crop_scale[0], recipe.crop_scale[1]);
        let ratio = uniform(rng, lr0, lr1).exp();
        let w = (target * ratio).sqrt();
        let h = (target / ratio).sqrt();
        if w <= n as f64 && h <= n as f64 {
            let top = uniform(rng, 0.0, n as f64 - h);
            let left = uniform(rng, 0.0, n as f64 - w);
            return (top, left, h, w);
        }
    }
    (0.0, 0.0, n as f64, n as f64)
}

/// Bilinear resample of a source window back to `n x n`.
fn resample(src: &[f32], n: usize, c: usize, (top, left, h, w): (f64, f64, f64, f64)) -> Vec<f32> {
    let mut out = vec![0.0f32; n * n * c];
    let max = (n - 1) as f64;
    for oy in 0..n {
        let sy = (top + (oy as f64 + 0.5) * h / n as f64 - 0.5).clamp(0.0, max);
        let (y0, fy) = (sy.floor() as usize, sy - sy.floor());
        let y1 = (y0 + 1).min(n - 1);
        for ox in 0..n {
            let sx = (left + (ox as f64 + 0.5) * w / n as f64 - 0.5).clamp(0.0, max);
            let (x0, fx) = (sx.floor() as usize, sx - sx.floor());
            let x1 = (x0 + 1).min(n - 1);
            for ch in 0..c {
                let at = |y: usize, x: usize| src[(y * n + x) * c + ch] as f64;
                let v = (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1.0 - fx) * at(y1, x0) + fx * at(y1, x1));
                out[(oy * n + ox) * c + ch] = v as f32;
            }
        }
    }
    out
}

fn luma(p: &[f32]) -> f32 {
    0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
}

fn rgb_to_hsv([r, g, b]: [f32; 3]) -> [f32; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d <= 0.0 {
        0.0
    } else if max == r {
        ((g - b) / d).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / d + 2.0) / 6.0
    } else {
        ((r - g) / d + 4.0) / 6.0
    };
    let s = if max <= 0.0 { 0.0 } else { d / max };
    [h, s, max]
}

fn hsv_to_rgb([h, s, v]: [f32; 3]) -> [f32; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let i = (h6.floor() as usize) % 6;
    let f = h6 - h6.floor();
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    match i {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

fn color_jitter<R: Rng + ?Sized>(px: &mut [f32], c: usize, recipe: &AugmentRecipe, rng: &mut R) {
    let b = uniform(rng, 1.0 - recipe.brightness, 1.0 + recipe.brightness) as f32;
    let k = uniform(rng, 1.0 - recipe.contrast, 1.0 + recipe.contrast) as f32;
    let s = uniform(rng, 1.0 - recipe.saturation, 1.0 + recipe.saturation) as f32;
    let h = uniform(rng, -recipe.hue, recipe.hue) as f32;
    px.iter_mut().for_each(|v| *v = (*v * b).clamp(0.0, 1.0));
    let mean = if c == 3 {
        px.chunks(3).map(luma).sum::<f32>() / (px.len() / 3) as f32
    } else {
        px.iter().sum::<f32>() / px.len() as f32
    };
    px.iter_mut().for_each(|v| *v = ((*v - mean) * k + mean).clamp(0.0, 1.0));
    if c != 3 {
        return;
    }
    for p in px.chunks_mut(3) {
        let g = luma(p);
        p.iter_mut().for_each(|v| *v = ((*v - g) * s + g).clamp(0.0, 1.0));
        if h != 0.0 {
            let [hh, ss, vv] = rgb_to_hsv([p[0], p[1], p[2]]);
            let rgb = hsv_to_rgb([hh + h, ss, vv]);
            p.iter_mut().zip(rgb).for_each(|(d, v)| *d = v.clamp(0.0, 1.0));
        }
    }
}

/// One random view of `img`. Id, truth and label are kept.
pub fn augment<R: Rng + ?Sized>(img: &ImageSample, recipe: &AugmentRecipe, rng: &mut R) -> Result<ImageSample> {
    let (n, c) = (img.size(), img.channels());
    let window = crop_window(n, recipe, rng);
    let mut px = if window == (0.0, 0.0, n as f64, n as f64) { img.pixels().to_vec() } else { resample(img.pixels(), n, c, window) };
    if rng.random_bool(recipe.flip_prob) {
        for y in 0..n {
            for x in 0..n / 2 {
                for ch in 0..c {
                    px.swap((y * n + x) * c + ch, (y * n + n - 1 - x) * c + ch);
                }
            }
        }
    }
    if rng.random_bool(recipe.jitter_prob) {
        color_jitter(&mut px, c, recipe, rng);
    }
    if c == 3 && rng.random_bool(recipe.grayscale_prob) {
        for p in px.chunks_mut(3) {
            let g = luma(p);
            p.iter_mut().for_each(|v| *v = g);
        }
    }
    px.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(img.with_pixels(px)?)
}
