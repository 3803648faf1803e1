use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{CoreError, ImageSample, Result};

/// A rotation by a multiple of 90 degrees, counter-clockwise.
///
/// The four members form a cyclic group under composition; the discriminant
/// doubles as the rotation-prediction class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Rotation {
    R0 = 0,
    R90 = 1,
    R180 = 2,
    R270 = 3,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];
    /// The three non-identity rotations.
    pub const NON_IDENTITY: [Rotation; 3] = [Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn degrees(self) -> u32 {
        self.index() as u32 * 90
    }

    pub fn from_degrees(degrees: i64) -> Result<Self> {
        if degrees.rem_euclid(90) != 0 || !(0..360).contains(&degrees) {
            return Err(CoreError::InvalidRotation(degrees));
        }
        Ok(Self::from_index((degrees / 90) as usize))
    }

    /// Class index in `0..4`.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Panics if `index >= 4`.
    pub fn from_index(index: usize) -> Self {
        Self::ALL[index]
    }

    pub fn compose(self, other: Rotation) -> Rotation {
        Self::from_index((self.index() + other.index()) % 4)
    }

    pub fn inverse(self) -> Rotation {
        Self::from_index((4 - self.index()) % 4)
    }
}

impl fmt::Display for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.degrees())
    }
}

impl TryFrom<u32> for Rotation {
    type Error = CoreError;

    fn try_from(degrees: u32) -> Result<Self> {
        Self::from_degrees(degrees as i64)
    }
}

impl From<Rotation> for u32 {
    fn from(r: Rotation) -> u32 {
        r.degrees()
    }
}

/// Rotates an `size x size x channels` HWC buffer by `r`.
///
/// Pure index permutation: every output value is a copy of an input value.
pub fn rotate_hwc(
    pixels: &[f32],
    height: usize,
    width: usize,
    channels: usize,
    r: Rotation,
) -> Result<Vec<f32>> {
    if height != width {
        return Err(CoreError::NonSquare { height, width });
    }
    let expected = height * width * channels;
    if pixels.len() != expected {
        return Err(CoreError::BufferSize { expected, actual: pixels.len() });
    }
    let n = height;
    if r == Rotation::R0 {
        return Ok(pixels.to_vec());
    }
    let mut out = vec![0.0f32; expected];
    for y in 0..n {
        for x in 0..n {
            let (sy, sx) = match r {
                Rotation::R0 => (y, x),
                Rotation::R90 => (x, n - 1 - y),
                Rotation::R180 => (n - 1 - y, n - 1 - x),
                Rotation::R270 => (n - 1 - x, y),
            };
            let dst = (y * n + x) * channels;
            let src = (sy * n + sx) * channels;
            out[dst..dst + channels].copy_from_slice(&pixels[src..src + channels]);
        }
    }
    Ok(out)
}

/// Rotates an image; the result keeps the id and accumulates the rotation tag.
pub fn rotate(img: &ImageSample, r: Rotation) -> ImageSample {
    let pixels = rotate_hwc(img.pixels(), img.size(), img.size(), img.channels(), r)
        .expect("ImageSample is square by construction");
    img.with_pixels_unchecked(pixels, img.rotation().compose(r))
}
