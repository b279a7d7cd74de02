//! Full-reference baselines on luma: PSNR and single-scale SSIM.

use crate::error::{Error, Result};
use crate::nss::GaussianWindow;
use crate::plane::FramePlane;

/// Identical content would be infinite dB; report this cap instead.
pub const PSNR_CAP: f64 = 100.0;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_L: f64 = 1.0;

fn check_pair(reference: &FramePlane, distorted: &FramePlane) -> Result<()> {
    if reference.width() != distorted.width() || reference.height() != distorted.height() {
        return Err(Error::DimensionMismatch(format!(
            "reference {}x{} vs distorted {}x{}",
            reference.height(),
            reference.width(),
            distorted.height(),
            distorted.width()
        )));
    }
    Ok(())
}

/// Per-frame PSNR in dB on normalized luma (peak 1.0), capped at
/// [`PSNR_CAP`] when the frames are identical.
pub fn psnr_frame(reference: &FramePlane, distorted: &FramePlane) -> Result<f64> {
    check_pair(reference, distorted)?;
    let n = reference.samples().len() as f64;
    let mse = reference
        .samples()
        .iter()
        .zip(distorted.samples())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse <= 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

/// Separable 11x11 Gaussian window, sigma 1.5, used in valid mode: only
/// pixels whose window lies fully inside the frame contribute.
fn ssim_window() -> GaussianWindow {
    GaussianWindow::new(5, 1.5).expect("static window parameters")
}

/// Valid-mode separable smoothing: output is (h-10) x (w-10).
fn smooth_valid(plane: &FramePlane, window: &GaussianWindow) -> FramePlane {
    let k = window.weights_1d();
    let half = window.half_width();
    let (w, h) = (plane.width(), plane.height());
    let out_w = w - 2 * half;
    // Rows first: full height, valid width.
    let mut rows = FramePlane::zeros(out_w, h);
    for r in 0..h {
        let src = plane.row(r);
        for c in 0..out_w {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                acc += kv * src[c + i];
            }
            rows.set(r, c, acc);
        }
    }
    let out_h = h - 2 * half;
    let mut out = FramePlane::zeros(out_w, out_h);
    for c in 0..out_w {
        for r in 0..out_h {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                acc += kv * rows.get(r + i, c);
            }
            out.set(r, c, acc);
        }
    }
    out
}

/// Per-frame mean SSIM over valid window positions.
pub fn ssim_frame(reference: &FramePlane, distorted: &FramePlane) -> Result<f64> {
    check_pair(reference, distorted)?;
    let window = ssim_window();
    let size = window.size();
    if reference.width() < size || reference.height() < size {
        return Err(Error::TooSmall(format!(
            "{}x{} frame is smaller than the {size}x{size} window",
            reference.height(),
            reference.width()
        )));
    }
    let c1 = (SSIM_K1 * SSIM_L) * (SSIM_K1 * SSIM_L);
    let c2 = (SSIM_K2 * SSIM_L) * (SSIM_K2 * SSIM_L);

    let sq = |p: &FramePlane| {
        FramePlane::new(
            p.width(),
            p.height(),
            p.samples().iter().map(|v| v * v).collect(),
        )
        .expect("same shape")
    };
    let prod = FramePlane::new(
        reference.width(),
        reference.height(),
        reference
            .samples()
            .iter()
            .zip(distorted.samples())
            .map(|(a, b)| a * b)
            .collect(),
    )?;

    let mu_x = smooth_valid(reference, &window);
    let mu_y = smooth_valid(distorted, &window);
    let xx = smooth_valid(&sq(reference), &window);
    let yy = smooth_valid(&sq(distorted), &window);
    let xy = smooth_valid(&prod, &window);

    let mut sum = 0.0;
    let n = mu_x.samples().len();
    for i in 0..n {
        let (mx, my) = (mu_x.samples()[i], mu_y.samples()[i]);
        let vx = xx.samples()[i] - mx * mx;
        let vy = yy.samples()[i] - my * my;
        let cxy = xy.samples()[i] - mx * my;
        sum += ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
            / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(sum / n as f64)
}

/// Frame-mean PSNR and SSIM over aligned luma sequences.
pub fn psnr_video(reference: &[FramePlane], distorted: &[FramePlane]) -> Result<f64> {
    video_mean(reference, distorted, psnr_frame)
}

pub fn ssim_video(reference: &[FramePlane], distorted: &[FramePlane]) -> Result<f64> {
    video_mean(reference, distorted, ssim_frame)
}

fn video_mean(
    reference: &[FramePlane],
    distorted: &[FramePlane],
    frame_fn: impl Fn(&FramePlane, &FramePlane) -> Result<f64>,
) -> Result<f64> {
    if reference.len() != distorted.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} reference frames vs {} distorted",
            reference.len(),
            distorted.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::TooFewFrames { need: 1, got: 0 });
    }
    let mut sum = 0.0;
    for (r, d) in reference.iter().zip(distorted) {
        sum += frame_fn(r, d)?;
    }
    Ok(sum / reference.len() as f64)
}
