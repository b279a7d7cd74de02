//! Patch-contrast statistics: NSS fits pooled within low-, medium- and
//! high-contrast patch groups.
//!
//! Frames are normalized once at full resolution, tiled into square
//! patches, and each patch is ranked by its mean local deviation. The
//! extreme percentiles form the low- and high-contrast groups; the
//! shared 18 statistics are fit per patch and averaged within each
//! group, giving 54 values per scale and 108 per frame over two scales.
//! The clip-level vector is either those 108 temporal means (summary
//! layout) or the means plus 108 averaged within-group-of-5-frames
//! deviations (full layout, 216 values).

use log::warn;

use crate::config::PatchMaxConfig;
use crate::error::{Error, Result};
use crate::nss::{self, GaussianWindow, NSS_FEATURES};
use crate::plane::{downscale2, FramePlane};
use crate::temporal;

/// Features per scale: three groups of the 18 shared statistics.
pub const FEATURES_PER_SCALE: usize = 3 * NSS_FEATURES;
/// Features per frame over both scales.
pub const FRAME_FEATURES: usize = 2 * FEATURES_PER_SCALE;
/// Clip-level widths.
pub const VIDEO_FEATURES_SUMMARY: usize = FRAME_FEATURES;
pub const VIDEO_FEATURES_FULL: usize = 2 * FRAME_FEATURES;
/// Frames per temporal deviation group.
pub const TEMPORAL_GROUP: usize = 5;

/// Patch indices (raster order over the patch grid) split by contrast
/// rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContrastGroups {
    pub low: Vec<usize>,
    pub medium: Vec<usize>,
    pub high: Vec<usize>,
}

/// Rank the non-overlapping patches of a local-deviation plane and split
/// them into contrast groups.
///
/// With n patches and percentile T, the high and low groups each take
/// ceil(n*T/100) patches; equal contrasts are resolved by patch raster
/// order. Partial patches at the right and bottom edges are discarded.
pub fn segment_patches(sigma: &FramePlane, cfg: &PatchMaxConfig) -> Result<ContrastGroups> {
    let p = cfg.patch_size;
    let rows = sigma.height() / p;
    let cols = sigma.width() / p;
    let n = rows * cols;
    if n < 3 {
        return Err(Error::TooSmall(format!(
            "{}x{} plane holds {} patches of side {p}; need at least 3",
            sigma.height(),
            sigma.width(),
            n
        )));
    }

    let mut contrast = Vec::with_capacity(n);
    for pr in 0..rows {
        for pc in 0..cols {
            let mut acc = 0.0;
            for r in pr * p..(pr + 1) * p {
                for c in pc * p..(pc + 1) * p {
                    acc += sigma.get(r, c);
                }
            }
            contrast.push(acc / (p * p) as f64);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        contrast[a]
            .partial_cmp(&contrast[b])
            .expect("local deviations are finite")
            .then(a.cmp(&b))
    });

    // Exact percentile counts; the cap keeps low and high disjoint at
    // extreme configured percentiles (an empty medium group is handled
    // by the frame-global fallback).
    let k = ((n as f64) * cfg.percentile / 100.0).ceil() as usize;
    let k = k.max(1).min(n / 2);
    let mut low: Vec<usize> = order[..k].to_vec();
    let mut medium: Vec<usize> = order[k..n - k].to_vec();
    let mut high: Vec<usize> = order[n - k..].to_vec();
    low.sort_unstable();
    medium.sort_unstable();
    high.sort_unstable();
    Ok(ContrastGroups { low, medium, high })
}

fn patch_origin(index: usize, cols: usize, p: usize) -> (usize, usize) {
    (index / cols * p, index % cols * p)
}

/// The 54 per-scale statistics: group means of the 18 shared statistics
/// in low, medium, high order.
fn scale_features(luma: &FramePlane, cfg: &PatchMaxConfig, c: f64) -> Result<Vec<f64>> {
    let window = GaussianWindow::standard();
    let (m, _, sigma) = nss::mscn_with_moments(luma, &window, c)?;
    let groups = segment_patches(&sigma, cfg)?;
    let p = cfg.patch_size;
    let cols = sigma.width() / p;

    // Per-patch fits; patches whose fits degenerate drop out of their
    // group mean.
    let mut out = Vec::with_capacity(FEATURES_PER_SCALE);
    let mut global: Option<[f64; NSS_FEATURES]> = None;
    for (name, group) in [
        ("low", &groups.low),
        ("medium", &groups.medium),
        ("high", &groups.high),
    ] {
        let mut sum = [0.0; NSS_FEATURES];
        let mut count = 0usize;
        for &idx in group {
            let (r0, c0) = patch_origin(idx, cols, p);
            let patch = m.crop(r0, c0, p, p)?;
            match nss::nss_features(&patch) {
                Ok(f) => {
                    for (s, v) in sum.iter_mut().zip(f) {
                        *s += v;
                    }
                    count += 1;
                }
                Err(Error::DegenerateInput(_)) | Err(Error::TooSmall(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        if count > 0 {
            out.extend(sum.iter().map(|s| s / count as f64));
        } else {
            // Whole group degenerate: stand in the frame-global fit.
            if global.is_none() {
                global = Some(nss::nss_features(&m).map_err(|e| match e {
                    Error::DegenerateInput(_) => Error::DegenerateInput(
                        "no patch in any contrast group has fittable statistics".into(),
                    ),
                    other => other,
                })?);
            }
            warn!("patchmax: {name}-contrast group empty, using frame-global statistics");
            out.extend_from_slice(&global.unwrap());
        }
    }
    Ok(out)
}

/// Per-frame features: 54 at full resolution followed by 54 on the
/// halved frame.
pub fn frame_features(luma: &FramePlane, cfg: &PatchMaxConfig, c: f64) -> Result<Vec<f64>> {
    let mut out = scale_features(luma, cfg, c)?;
    out.extend(scale_features(&downscale2(luma)?, cfg, c)?);
    debug_assert_eq!(out.len(), FRAME_FEATURES);
    Ok(out)
}

/// Clip-level summary vector: temporal means of the per-frame features.
pub fn video_features_summary(per_frame: &[Vec<f64>]) -> Result<Vec<f64>> {
    let means = temporal::column_means(per_frame)?;
    if means.len() != FRAME_FEATURES {
        return Err(Error::DimensionMismatch(format!(
            "expected {FRAME_FEATURES} per-frame features, got {}",
            means.len()
        )));
    }
    Ok(means)
}

/// Clip-level full vector: temporal means followed by the per-column
/// deviations within non-overlapping 5-frame groups, averaged over
/// groups.
pub fn video_features_full(per_frame: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut out = video_features_summary(per_frame)?;
    out.extend(temporal::grouped_column_stds(per_frame, TEMPORAL_GROUP)?);
    debug_assert_eq!(out.len(), VIDEO_FEATURES_FULL);
    Ok(out)
}
