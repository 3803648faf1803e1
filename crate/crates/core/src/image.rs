use crate::{rotate, CoreError, Result, Rotation, Verdict};

/// A square HWC image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSample {
    id: String,
    size: usize,
    channels: usize,
    pixels: Vec<f32>,
    truth: Option<Verdict>,
    label: Option<usize>,
    rotation: Rotation,
}

impl ImageSample {
    pub fn new(
        id: impl Into<String>,
        height: usize,
        width: usize,
        channels: usize,
        pixels: Vec<f32>,
    ) -> Result<Self> {
        if height != width {
            return Err(CoreError::NonSquare { height, width });
        }
        if height == 0 || channels == 0 {
            return Err(CoreError::EmptyImage);
        }
        let expected = height * width * channels;
        if pixels.len() != expected {
            return Err(CoreError::BufferSize { expected, actual: pixels.len() });
        }
        if let Some((index, &value)) =
            pixels.iter().enumerate().find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(CoreError::PixelRange { index, value });
        }
        Ok(Self {
            id: id.into(),
            size: height,
            channels,
            pixels,
            truth: None,
            label: None,
            rotation: Rotation::R0,
        })
    }

    /// Ground-truth symmetry label (synthetic corpora only).
    pub fn with_truth(mut self, truth: Verdict) -> Self {
        self.truth = Some(truth);
        self
    }

    /// Class label used by linear evaluation.
    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Side length.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn truth(&self) -> Option<Verdict> {
        self.truth
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    /// Accumulated rotation relative to the source image.
    pub fn rotation(&self) -> Rotation {
        self.rotation
    }

    pub fn pixel(&self, y: usize, x: usize, c: usize) -> f32 {
        self.pixels[(y * self.size + x) * self.channels + c]
    }

    /// Replaces the pixel buffer, validating range and length.
    pub fn with_pixels(&self, pixels: Vec<f32>) -> Result<Self> {
        let fresh = Self::new(self.id.clone(), self.size, self.size, self.channels, pixels)?;
        Ok(Self { truth: self.truth, label: self.label, rotation: self.rotation, ..fresh })
    }

    /// Used by transforms that provably preserve shape and range.
    pub(crate) fn with_pixels_unchecked(&self, pixels: Vec<f32>, rotation: Rotation) -> Self {
        debug_assert_eq!(pixels.len(), self.pixels.len());
        Self {
            id: self.id.clone(),
            size: self.size,
            channels: self.channels,
            pixels,
            truth: self.truth,
            label: self.label,
            rotation,
        }
    }
}

/// Every image under all four rotations, sample-major and rotation-minor.
pub fn expand_with_rotations(batch: &[ImageSample]) -> Result<Vec<(ImageSample, Rotation)>> {
    if batch.is_empty() {
        return Err(CoreError::EmptyBatch);
    }
    Ok(batch
        .iter()
        .flat_map(|img| Rotation::ALL.into_iter().map(move |r| (rotate(img, r), r)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(id: &str, size: usize, v: f32) -> ImageSample {
        ImageSample::new(id, size, size, 1, vec![v; size * size]).unwrap()
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert_eq!(
            ImageSample::new("a", 2, 3, 1, vec![0.0; 6]).unwrap_err(),
            CoreError::NonSquare { height: 2, width: 3 }
        );
        assert!(matches!(
            ImageSample::new("a", 2, 2, 1, vec![0.0; 3]),
            Err(CoreError::BufferSize { .. })
        ));
        assert!(matches!(
            ImageSample::new("a", 1, 1, 1, vec![1.5]),
            Err(CoreError::PixelRange { .. })
        ));
        assert!(matches!(
            ImageSample::new("a", 1, 1, 1, vec![f32::NAN]),
            Err(CoreError::PixelRange { .. })
        ));
    }

    #[test]
    fn expansion_counts_and_labels() {
        let batch = vec![gray("a", 3, 0.1), gray("b", 3, 0.2)];
        let out = expand_with_rotations(&batch).unwrap();
        assert_eq!(out.len(), 8);
        for (k, chunk) in out.chunks(4).enumerate() {
            let labels: Vec<Rotation> = chunk.iter().map(|(_, r)| *r).collect();
            assert_eq!(labels, Rotation::ALL.to_vec());
            assert!(chunk.iter().all(|(img, _)| img.id() == batch[k].id()));
        }
    }

    #[test]
    fn expansion_of_a_training_batch() {
        let batch: Vec<_> = (0..64).map(|i| gray(&format!("s{i}"), 2, 0.5)).collect();
        assert_eq!(expand_with_rotations(&batch).unwrap().len(), 256);
    }

    #[test]
    fn empty_batch_is_an_error() {
        assert_eq!(expand_with_rotations(&[]).unwrap_err(), CoreError::EmptyBatch);
    }
}
