//! Per-video content descriptors: spatial information, temporal
//! information, colorfulness, and average luminance.
//!
//! SI and TI follow the usual subjective-testing conventions: the
//! maximum over frames of the spatial standard deviation of the Sobel
//! gradient magnitude, and of the successive-frame luma difference.
//! Colorfulness is the opponent-channel statistic
//! sqrt(var(rg) + var(yb)) + 0.3 sqrt(mean(rg)^2 + mean(yb)^2)
//! averaged over frames. All values are computed on encoded (not
//! linearized) normalized codes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::media::{yuv_to_rgb, VideoFrame, VideoMeta};
use crate::plane::FramePlane;
use crate::stchips::sobel_magnitude;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescriptorSet {
    pub si: f64,
    pub ti: f64,
    pub colorfulness: f64,
    pub avg_luminance: f64,
}

fn spatial_std(plane: &FramePlane) -> f64 {
    let n = plane.samples().len() as f64;
    let mean = plane.mean();
    let var = plane.samples().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.max(0.0).sqrt()
}

fn frame_colorfulness(rgb: &[FramePlane; 3]) -> f64 {
    let n = rgb[0].samples().len() as f64;
    let (mut rg_sum, mut rg_sq, mut yb_sum, mut yb_sq) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..rgb[0].samples().len() {
        let r = rgb[0].samples()[i];
        let g = rgb[1].samples()[i];
        let b = rgb[2].samples()[i];
        let rg = r - g;
        let yb = 0.5 * (r + g) - b;
        rg_sum += rg;
        rg_sq += rg * rg;
        yb_sum += yb;
        yb_sq += yb * yb;
    }
    let (rg_mu, yb_mu) = (rg_sum / n, yb_sum / n);
    let rg_var = (rg_sq / n - rg_mu * rg_mu).max(0.0);
    let yb_var = (yb_sq / n - yb_mu * yb_mu).max(0.0);
    (rg_var + yb_var).sqrt() + 0.3 * (rg_mu * rg_mu + yb_mu * yb_mu).sqrt()
}

/// Streaming accumulator: push frames in display order, read the set
/// once at least two frames have arrived.
pub struct DescriptorAccumulator {
    meta: VideoMeta,
    prev_luma: Option<FramePlane>,
    si_max: f64,
    ti_max: f64,
    color_sum: f64,
    luma_sum: f64,
    sample_count: u64,
    frames: usize,
}

impl DescriptorAccumulator {
    pub fn new(meta: &VideoMeta) -> Self {
        Self {
            meta: meta.clone(),
            prev_luma: None,
            si_max: 0.0,
            ti_max: 0.0,
            color_sum: 0.0,
            luma_sum: 0.0,
            sample_count: 0,
            frames: 0,
        }
    }

    pub fn push(&mut self, frame: &VideoFrame) -> Result<()> {
        let grad = sobel_magnitude(&frame.y)?;
        self.si_max = self.si_max.max(spatial_std(&grad));
        if let Some(prev) = &self.prev_luma {
            if prev.width() != frame.y.width() || prev.height() != frame.y.height() {
                return Err(Error::DimensionMismatch(
                    "frame sizes differ across the sequence".into(),
                ));
            }
            let diff = FramePlane::new(
                prev.width(),
                prev.height(),
                frame
                    .y
                    .samples()
                    .iter()
                    .zip(prev.samples())
                    .map(|(a, b)| a - b)
                    .collect(),
            )?;
            self.ti_max = self.ti_max.max(spatial_std(&diff));
        }
        let rgb = yuv_to_rgb(frame, &self.meta)?;
        self.color_sum += frame_colorfulness(&rgb);
        self.luma_sum += frame.y.samples().iter().sum::<f64>();
        self.sample_count += frame.y.samples().len() as u64;
        self.prev_luma = Some(frame.y.clone());
        self.frames += 1;
        Ok(())
    }

    pub fn finish(&self) -> Result<DescriptorSet> {
        if self.frames < 2 {
            return Err(Error::TooFewFrames {
                need: 2,
                got: self.frames,
            });
        }
        Ok(DescriptorSet {
            si: self.si_max,
            ti: self.ti_max,
            colorfulness: self.color_sum / self.frames as f64,
            avg_luminance: self.luma_sum / self.sample_count as f64,
        })
    }
}

/// Whole-clip convenience wrapper over [`DescriptorAccumulator`].
pub fn descriptors(meta: &VideoMeta, frames: &[VideoFrame]) -> Result<DescriptorSet> {
    let mut acc = DescriptorAccumulator::new(meta);
    for f in frames {
        acc.push(f)?;
    }
    acc.finish()
}
