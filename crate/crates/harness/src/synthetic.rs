//! Synthetic corpus with known rotation symmetry.
//!
//! Symmetric images are built by averaging a random field over its four
//! rotations, so they are exactly 4-fold symmetric before noise. Oriented
//! images carry a top-bright luminance ramp plus an upright shape, so their
//! top and bottom halves swap brightness order under a half turn.

use pnda_core::{ImageSample, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticCorpusSpec {
    pub n_rai: usize,
    pub n_nonrai: usize,
    pub size: usize,
    /// Standard deviation of the iid Gaussian pixel noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        Self { n_rai: 1000, n_nonrai: 1000, size: 32, noise: 0.02, seed: 0 }
    }
}

/// Pattern families; the discriminant doubles as the class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Rings,
    Blobs,
    Petals,
    Ramp,
    Arrow,
    Landscape,
}

impl Family {
    pub const RAI: [Family; 3] = [Family::Rings, Family::Blobs, Family::Petals];
    pub const NON_RAI: [Family; 3] = [Family::Ramp, Family::Arrow, Family::Landscape];
    pub const COUNT: usize = 6;

    pub fn label(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Rings => "rings",
            Family::Blobs => "blobs",
            Family::Petals => "petals",
            Family::Ramp => "ramp",
            Family::Arrow => "arrow",
            Family::Landscape => "landscape",
        }
    }
}

/// Generates `n_rai` symmetric images followed by `n_nonrai` oriented ones,
/// cycling through the families of each kind. Ids are `rai-00000`, `non-00000`, ...
pub fn generate_synthetic_corpus(spec: &SyntheticCorpusSpec) -> Result<Vec<ImageSample>> {
    if spec.size < 4 {
        return Err(HarnessError::Config(format!("synthetic images need size >= 4, got {}", spec.size)));
    }
    if !(spec.noise.is_finite() && spec.noise >= 0.0) {
        return Err(HarnessError::Config(format!("noise must be non-negative, got {}", spec.noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise).expect("finite non-negative sigma");
    let mut out = Vec::with_capacity(spec.n_rai + spec.n_nonrai);
    for i in 0..spec.n_rai + spec.n_nonrai {
        let (family, id, truth) = if i < spec.n_rai {
            (Family::RAI[i % 3], format!("rai-{i:05}"), Verdict::Rai)
        } else {
            let j = i - spec.n_rai;
            (Family::NON_RAI[j % 3], format!("non-{j:05}"), Verdict::NonRai)
        };
        let field = render(family, spec.size, &mut rng);
        let tint: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.75..1.0));
        let shift: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.05..0.05));
        let mut pixels = Vec::with_capacity(field.len() * 3);
        for v in &field {
            for c in 0..3 {
                let base = (0.5 + (v - 0.5) * tint[c] + shift[c]).clamp(0.05, 0.95);
                pixels.push((base + noise.sample(&mut rng)).clamp(0.0, 1.0) as f32);
            }
        }
        out.push(ImageSample::new(id, spec.size, spec.size, 3, pixels)?.with_truth(truth).with_label(family.label()));
    }
    Ok(out)
}

/// Field values in roughly [0.1, 0.9], row-major.
fn render(family: Family, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let c = (n as f64 - 1.0) / 2.0;
    let coords = |y: usize, x: usize| ((x as f64 - c) / c, (y as f64 - c) / c);
    let mut field = vec![0.0; n * n];
    match family {
        Family::Rings => {
            let freq = rng.random_range(2.0..5.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            for y in 0..n {
                for x in 0..n {
                    let (u, v) = coords(y, x);
                    field[y * n + x] = 0.5 + 0.35 * (std::f64::consts::PI * freq * (u * u + v * v).sqrt() + phase).sin();
                }
            }
        }
        Family::Blobs => {
            let k = rng.random_range(2..5);
            let blobs: Vec<(f64, f64, f64, f64)> = (0..k)
                .map(|_| {
                    (rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8), rng.random_range(0.15..0.4), rng.random_range(-1.0..1.0))
                })
                .collect();
            for y in 0..n {
                for x in 0..n {
                    let (u, v) = coords(y, x);
                    let s: f64 = blobs.iter().map(|(bu, bv, r, a)| a * (-((u - bu).powi(2) + (v - bv).powi(2)) / (r * r)).exp()).sum();
                    field[y * n + x] = 0.5 + 0.3 * s.tanh();
                }
            }
        }
        Family::Petals => {
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let width = rng.random_range(0.4..0.9);
            let k = [4.0, 8.0][rng.random_range(0..2)];
            for y in 0..n {
                for x in 0..n {
                    let (u, v) = coords(y, x);
                    let r2 = u * u + v * v;
                    field[y * n + x] = 0.5 + 0.35 * (k * v.atan2(u) + phase).cos() * (-r2 / (width * width)).exp();
                }
            }
        }
        Family::Ramp => {
            let wobble = rng.random_range(0.0..0.1);
            let freq = rng.random_range(1.0..3.0);
            for y in 0..n {
                for x in 0..n {
                    let (u, v) = coords(y, x);
                    field[y * n + x] = 0.5 - 0.35 * v + wobble * (std::f64::consts::PI * freq * u).sin();
                }
            }
        }
        Family::Arrow => {
            let cx = rng.random_range(-0.3..0.3);
            let half = rng.random_range(0.3..0.5);
            let fg = rng.random_range(0.75..0.9);
            for y in 0..n {
                for x in 0..n {
                    let (u, v) = coords(y, x);
                    // Upward triangle head with a shaft below it.
                    let head = (-0.8..=0.0).contains(&v) && (u - cx).abs() <= half * (v + 0.8) / 0.8;
                    let shaft = (0.0..=0.8).contains(&v) && (u - cx).abs() <= 0.25 * half;
                    let bg = 0.45 - 0.25 * v;
                    field[y * n + x] = if head || shaft { fg - 0.1 * v } else { bg };
                }
            }
        }
        Family::Landscape => {
            let horizon = rng.random_range(0.2..0.5);
            let ox = rng.random_range(-0.5..0.5);
            let orad = rng.random_range(0.15..0.3);
            for y in 0..n {
                for x in 0..n {
                    let (u, v) = coords(y, x);
                    let sky = 0.85 - 0.2 * (v + 1.0);
                    let object = (u - ox).powi(2) + (v - (horizon - orad)).powi(2) <= orad * orad;
                    field[y * n + x] = if v > horizon {
                        0.15 + 0.05 * (v - horizon)
                    } else if object {
                        0.35
                    } else {
                        sky
                    };
                }
            }
        }
    }
    if Family::RAI.contains(&family) {
        symmetrize(&mut field, n);
    }
    field
}

/// Replaces each value by the mean over its 90-degree rotation orbit, summed
/// in a fixed index order so the result is exactly invariant.
fn symmetrize(field: &mut [f64], n: usize) {
    let src = field.to_vec();
    let rot = |i: usize| {
        let (y, x) = (i / n, i % n);
        x * n + (n - 1 - y)
    };
    for i in 0..n * n {
        let mut orbit = [i, rot(i), rot(rot(i)), rot(rot(rot(i)))];
        orbit.sort_unstable();
        field[i] = orbit.iter().map(|&j| src[j]).sum::<f64>() / 4.0;
    }
}
