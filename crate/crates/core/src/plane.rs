//! Row-major luma/chroma plane with f64 samples.
//!
//! Decoded planes are normalized to [0, 1]; intermediate planes (MSCN
//! coefficients, gradient magnitudes, transformed pixels) reuse the same
//! container with whatever range the producing stage defines.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FramePlane {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl FramePlane {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch(format!(
                "plane dimensions must be positive, got {width}x{height}"
            )));
        }
        if samples.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height,
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            samples: vec![0.0; width * height],
        }
    }

    /// Build a plane by evaluating `f(row, col)` at every sample.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut samples = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                samples.push(f(r, c));
            }
        }
        Self {
            width,
            height,
            samples,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width);
        self.samples[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        debug_assert!(row < self.height && col < self.width);
        self.samples[row * self.width + col] = v;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.samples[row * self.width..(row + 1) * self.width]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Copy of the rectangle starting at (row0, col0).
    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<Self> {
        if row0 + height > self.height || col0 + width > self.width {
            return Err(Error::DimensionMismatch(format!(
                "crop {height}x{width}@({row0},{col0}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut samples = Vec::with_capacity(width * height);
        for r in row0..row0 + height {
            samples.extend_from_slice(&self.samples[r * self.width + col0..r * self.width + col0 + width]);
        }
        Self::new(width, height, samples)
    }
}

/// Halve both dimensions by averaging non-overlapping 2x2 blocks.
/// A trailing odd row or column is dropped.
pub fn downscale2(plane: &FramePlane) -> Result<FramePlane> {
    let w = plane.width() / 2;
    let h = plane.height() / 2;
    if w == 0 || h == 0 {
        return Err(Error::TooSmall(format!(
            "cannot halve a {}x{} plane",
            plane.width(),
            plane.height()
        )));
    }
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        let top = plane.row(2 * r);
        let bot = plane.row(2 * r + 1);
        for c in 0..w {
            out.push(0.25 * (top[2 * c] + top[2 * c + 1] + bot[2 * c] + bot[2 * c + 1]));
        }
    }
    FramePlane::new(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constructor_rejects_bad_lengths() {
        assert!(FramePlane::new(3, 2, vec![0.0; 5]).is_err());
        assert!(FramePlane::new(0, 2, vec![]).is_err());
        assert!(FramePlane::new(3, 2, vec![0.0; 6]).is_ok());
    }

    #[test]
    fn downscale_checkerboard_is_flat() {
        // 0/1 checkerboard: every 2x2 block holds two zeros and two ones.
        let p = FramePlane::from_fn(4, 4, |r, c| ((r + c) % 2) as f64);
        let d = downscale2(&p).unwrap();
        assert_eq!(d.width(), 2);
        assert_eq!(d.height(), 2);
        for &v in d.samples() {
            assert_eq!(v, 0.5);
        }
    }

    #[test]
    fn downscale_drops_odd_trailing() {
        let p = FramePlane::from_fn(5, 3, |r, c| (r * 5 + c) as f64);
        let d = downscale2(&p).unwrap();
        assert_eq!(d.width(), 2);
        assert_eq!(d.height(), 1);
        assert_eq!(d.get(0, 0), (0.0 + 1.0 + 5.0 + 6.0) / 4.0);
        assert_eq!(d.get(0, 1), (2.0 + 3.0 + 7.0 + 8.0) / 4.0);
    }

    #[test]
    fn crop_matches_direct_indexing() {
        let p = FramePlane::from_fn(7, 6, |r, c| (r * 10 + c) as f64);
        let s = p.crop(2, 3, 3, 4).unwrap();
        for r in 0..3 {
            for c in 0..4 {
                assert_eq!(s.get(r, c), p.get(r + 2, c + 3));
            }
        }
        assert!(p.crop(4, 4, 3, 4).is_err());
    }

    proptest! {
        // Mean pooling preserves the grand mean on even-sized planes.
        #[test]
        fn downscale_preserves_mean(w in 1usize..12, h in 1usize..12, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let p = FramePlane::from_fn(2 * w, 2 * h, |_, _| rng.gen_range(-1.0..1.0));
            let d = downscale2(&p).unwrap();
            prop_assert!((d.mean() - p.mean()).abs() < 1e-12);
        }
    }
}
