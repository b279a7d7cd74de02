//! Local expansive nonlinearity statistics.
//!
//! Each frame is retiled into stride-sized cells; every cell is min/max
//! rescaled to [-1, 1] against a window-sized support centered on it and
//! passed through an odd exponential expansion that stretches the tails
//! of the local brightness distribution. NSS fits of the transformed
//! plane emphasize the brightest and darkest excursions, where HDR
//! processing differs most from SDR.

use crate::config::HdrMaxConfig;
use crate::error::{Error, Result};
use crate::nss::{self, GaussianWindow, NSS_FEATURES};
use crate::plane::{downscale2, FramePlane};
use crate::temporal;

/// Features per frame: the 18 shared statistics at two scales.
pub const FRAME_FEATURES: usize = 2 * NSS_FEATURES;
/// Clip-level width: temporal means plus averaged 5-frame-group
/// deviations.
pub const VIDEO_FEATURES: usize = 2 * FRAME_FEATURES;
/// Frames per temporal deviation group.
pub const TEMPORAL_GROUP: usize = 5;

/// The odd expansive nonlinearity: exp(delta*x) - 1 for x >= 0,
/// mirrored for x < 0.
#[inline]
pub fn expansive(x: f64, delta: f64) -> f64 {
    if x >= 0.0 {
        (delta * x).exp() - 1.0
    } else {
        1.0 - (-delta * x).exp()
    }
}

/// Apply the windowed rescale-and-expand transform. Output dimensions
/// equal the input's.
///
/// The frame is tiled into stride x stride cells (edge cells absorb the
/// remainder); each cell's min/max come from a window-sized support
/// centered on it, clipped at the frame borders. A cell whose support
/// has zero spread outputs zeros.
pub fn hdrmax_transform(plane: &FramePlane, cfg: &HdrMaxConfig) -> Result<FramePlane> {
    if cfg.stride == 0 || cfg.window % cfg.stride != 0 {
        return Err(Error::InvalidConfig(format!(
            "stride {} must divide window {}",
            cfg.stride, cfg.window
        )));
    }
    let (w, h) = (plane.width(), plane.height());
    if w < cfg.window || h < cfg.window {
        return Err(Error::TooSmall(format!(
            "{h}x{w} plane is smaller than the {0}x{0} analysis window",
            cfg.window
        )));
    }

    let s = cfg.stride;
    let margin = (cfg.window - s) / 2;
    let cells_r = h.div_ceil(s);
    let cells_c = w.div_ceil(s);
    let mut out = FramePlane::zeros(w, h);
    for cr in 0..cells_r {
        let r0 = cr * s;
        let r1 = ((cr + 1) * s).min(h);
        let sup_r0 = r0.saturating_sub(margin);
        let sup_r1 = (r0 + s + margin).min(h);
        for cc in 0..cells_c {
            let c0 = cc * s;
            let c1 = ((cc + 1) * s).min(w);
            let sup_c0 = c0.saturating_sub(margin);
            let sup_c1 = (c0 + s + margin).min(w);

            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for r in sup_r0..sup_r1 {
                let row = plane.row(r);
                for &v in &row[sup_c0..sup_c1] {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if hi <= lo {
                continue; // degenerate support: cell stays zero
            }
            let span = hi - lo;
            for r in r0..r1 {
                for c in c0..c1 {
                    let y = 2.0 * (plane.get(r, c) - lo) / span - 1.0;
                    out.set(r, c, expansive(y, cfg.delta));
                }
            }
        }
    }
    Ok(out)
}

fn scale_features(
    luma: &FramePlane,
    cfg: &HdrMaxConfig,
    c: f64,
    window: &GaussianWindow,
) -> Result<[f64; NSS_FEATURES]> {
    let transformed = hdrmax_transform(luma, cfg)?;
    let m = nss::mscn(&transformed, window, c)?;
    nss::nss_features(&m).map_err(|e| match e {
        Error::DegenerateInput(_) => {
            Error::DegenerateInput("transformed frame carries no local structure".into())
        }
        other => other,
    })
}

/// Per-frame features: 18 statistics of the transformed full-resolution
/// frame and 18 of the transformed half-resolution frame.
pub fn frame_features(luma: &FramePlane, cfg: &HdrMaxConfig, c: f64) -> Result<Vec<f64>> {
    let window = GaussianWindow::standard();
    let mut out = Vec::with_capacity(FRAME_FEATURES);
    out.extend(scale_features(luma, cfg, c, &window)?);
    out.extend(scale_features(&downscale2(luma)?, cfg, c, &window)?);
    Ok(out)
}

/// Clip-level vector: 36 temporal means followed by 36 per-column
/// deviations within non-overlapping 5-frame groups, averaged.
pub fn video_features(per_frame: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut out = temporal::column_means(per_frame)?;
    if out.len() != FRAME_FEATURES {
        return Err(Error::DimensionMismatch(format!(
            "expected {FRAME_FEATURES} per-frame features, got {}",
            out.len()
        )));
    }
    out.extend(temporal::grouped_column_stds(per_frame, TEMPORAL_GROUP)?);
    debug_assert_eq!(out.len(), VIDEO_FEATURES);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::HdrMaxConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> HdrMaxConfig {
        HdrMaxConfig::default()
    }

    #[test]
    fn two_valued_frame_maps_to_extreme_outputs() {
        // Stride-wide stripes of a and b: every cell support straddles a
        // stripe boundary, so the transform emits only f(-1) and f(+1).
        let (a, b) = (0.3, 0.7);
        let plane = FramePlane::from_fn(40, 20, |_, c| if (c / 10) % 2 == 0 { a } else { b });
        let t = hdrmax_transform(&plane, &cfg()).unwrap();
        let delta = cfg().delta;
        let f_lo = 1.0 - delta.exp(); // f(-1)
        let f_hi = delta.exp() - 1.0; // f(+1)
        for r in 0..20 {
            for c in 0..40 {
                let expect = if (c / 10) % 2 == 0 { f_lo } else { f_hi };
                assert!((t.get(r, c) - expect).abs() < 1e-12, "({r},{c}) = {}", t.get(r, c));
            }
        }
    }

    #[test]
    fn transform_is_odd_under_complement() {
        // Complementing the input negates the rescaled value, and the
        // nonlinearity is odd, so the output negates exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let plane = FramePlane::from_fn(44, 36, |_, _| rng.gen_range(0.0..1.0));
        let complement = FramePlane::new(
            44,
            36,
            plane.samples().iter().map(|v| 1.0 - v).collect(),
        )
        .unwrap();
        let t1 = hdrmax_transform(&plane, &cfg()).unwrap();
        let t2 = hdrmax_transform(&complement, &cfg()).unwrap();
        for (x, y) in t1.samples().iter().zip(t2.samples()) {
            assert!((x + y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn constant_frame_transforms_to_zeros() {
        let plane = FramePlane::from_fn(30, 30, |_, _| 0.42);
        let t = hdrmax_transform(&plane, &cfg()).unwrap();
        assert!(t.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_dimensions_match_input() {
        // Sizes that do not divide the stride still cover every pixel.
        let plane = FramePlane::from_fn(47, 33, |r, c| ((r * 7 + c) % 13) as f64 / 13.0);
        let t = hdrmax_transform(&plane, &cfg()).unwrap();
        assert_eq!((t.width(), t.height()), (47, 33));
    }

    #[test]
    fn undersized_frame_is_an_error() {
        let plane = FramePlane::zeros(19, 25);
        assert!(matches!(hdrmax_transform(&plane, &cfg()), Err(Error::TooSmall(_))));
    }

    #[test]
    fn frame_features_width_and_constant_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let plane = FramePlane::from_fn(64, 48, |_, _| rng.gen_range(0.0..1.0));
        let f = frame_features(&plane, &cfg(), nss::DEFAULT_C).unwrap();
        assert_eq!(f.len(), 36);
        assert!(f.iter().all(|v| v.is_finite()));

        let flat = FramePlane::from_fn(64, 48, |_, _| 0.5);
        assert!(matches!(
            frame_features(&flat, &cfg(), nss::DEFAULT_C),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn expansion_stretches_tails() {
        // The transform must push band edges harder than mid-tones:
        // check strict monotonicity and convexity of f on [0, 1].
        let delta = 4.0;
        let mut prev = 0.0;
        let mut prev_gap = 0.0;
        for i in 1..=10 {
            let x = i as f64 / 10.0;
            let y = expansive(x, delta);
            assert!(y > prev);
            let gap = y - prev;
            assert!(gap > prev_gap, "gap {gap} at {x}");
            prev = y;
            prev_gap = gap;
        }
    }

    #[test]
    fn video_features_width() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64; FRAME_FEATURES]).collect();
        let v = video_features(&rows).unwrap();
        assert_eq!(v.len(), 72);
        assert_eq!(v[0], 4.5);
        assert!(video_features(&rows[..4]).is_err());
    }
}
