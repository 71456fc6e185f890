//! Gray-level lattice images.
//!
//! Pixels are stored as quantized level indices (integers), not luminances,
//! so equality tests between pixels are exact. The luminance of level `k` on
//! an `l`-level image is `k / (l - 1)`, in `[0, 1]`. Data is kept in
//! column-major linear order, `i = col * height + row`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ImageError {
    #[error("invalid dimensions {0}x{1}")]
    BadDimensions(usize, usize),
    #[error("levels must be at least 1, got {0}")]
    BadLevels(u16),
    #[error("data length {0} does not match {1}x{2}")]
    BadDataLength(usize, usize, usize),
    #[error("pixel value {0} out of range for {1} levels")]
    LevelOutOfRange(u16, u16),
    #[error("images differ in shape: {0}x{1}/{2} levels vs {3}x{4}/{5} levels")]
    ShapeMismatch(usize, usize, u16, usize, usize, u16),
}

/// Rectangular lattice of gray-level indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelImage {
    width: usize,
    height: usize,
    levels: u16,
    data: Vec<u16>,
}

impl LevelImage {
    /// Builds an image from column-major level data, validating every pixel.
    pub fn new(
        width: usize,
        height: usize,
        levels: u16,
        data: Vec<u16>,
    ) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::BadDimensions(width, height));
        }
        if levels == 0 {
            return Err(ImageError::BadLevels(levels));
        }
        if data.len() != width * height {
            return Err(ImageError::BadDataLength(data.len(), width, height));
        }
        if let Some(&bad) = data.iter().find(|&&v| v >= levels) {
            return Err(ImageError::LevelOutOfRange(bad, levels));
        }
        Ok(LevelImage { width, height, levels, data })
    }

    /// Constant image at the given level.
    pub fn constant(
        width: usize,
        height: usize,
        levels: u16,
        level: u16,
    ) -> Result<Self, ImageError> {
        Self::new(width, height, levels, vec![level; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn levels(&self) -> u16 {
        self.levels
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u16] {
        &mut self.data
    }

    #[inline]
    pub fn level_at(&self, index: usize) -> u16 {
        self.data[index]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.data[crate::lattice::to_linear(row, col, self.height)]
    }

    /// Luminance of the pixel at linear index `index`.
    #[inline]
    pub fn luminance_at(&self, index: usize) -> f64 {
        luminance(self.data[index], self.levels)
    }

    /// Replaces the pixel data, keeping dimensions and level count.
    pub fn with_data(&self, data: Vec<u16>) -> Result<Self, ImageError> {
        Self::new(self.width, self.height, self.levels, data)
    }

    /// Errors unless `other` has identical dimensions and level count.
    pub fn check_same_shape(&self, other: &LevelImage) -> Result<(), ImageError> {
        if self.width != other.width || self.height != other.height || self.levels != other.levels
        {
            return Err(ImageError::ShapeMismatch(
                self.width,
                self.height,
                self.levels,
                other.width,
                other.height,
                other.levels,
            ));
        }
        Ok(())
    }
}

/// Luminance of level `k` among `levels` gray levels: `k / (levels - 1)`.
///
/// The degenerate single-level image maps its only level to 0.0.
#[inline]
pub fn luminance(level: u16, levels: u16) -> f64 {
    if levels <= 1 {
        0.0
    } else {
        level as f64 / (levels - 1) as f64
    }
}

/// Precomputed luminance of every level.
pub(crate) fn luminance_table(levels: u16) -> Vec<f64> {
    (0..levels).map(|k| luminance(k, levels)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luminance_endpoints() {
        assert_eq!(luminance(0, 5), 0.0);
        assert_eq!(luminance(4, 5), 1.0);
        assert_eq!(luminance(2, 5), 0.5);
        assert_eq!(luminance(0, 1), 0.0);
    }

    #[test]
    fn rejects_out_of_range_pixels() {
        assert_eq!(
            LevelImage::new(2, 1, 2, vec![0, 2]),
            Err(ImageError::LevelOutOfRange(2, 2))
        );
    }

    #[test]
    fn rejects_bad_lengths_and_dims() {
        assert!(LevelImage::new(2, 2, 2, vec![0; 3]).is_err());
        assert!(LevelImage::new(0, 2, 2, vec![]).is_err());
        assert!(LevelImage::new(2, 2, 0, vec![0; 4]).is_err());
    }

    #[test]
    fn column_major_get() {
        // 2x3 (w=2, h=3): data index c*3 + r.
        let img = LevelImage::new(2, 3, 7, vec![0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(img.get(0, 0), 0);
        assert_eq!(img.get(2, 0), 2);
        assert_eq!(img.get(0, 1), 3);
        assert_eq!(img.get(2, 1), 5);
    }
}
