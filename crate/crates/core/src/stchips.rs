//! Spatiotemporal gradient chips.
//!
//! Per frame: Sobel gradient magnitude, MSCN normalization, then a
//! 5-tap zero-DC temporal bandpass across frames (valid mode). The
//! filtered sequence is cut into non-overlapping 5-frame blocks; within
//! each block, every 5x5x5 volume on a stride-5 spatial grid contributes
//! one 5x5 chip: the planar slice through the volume center, over all
//! five frames, whose in-plane spatial normal sits at one of six
//! orientations. The chip whose sample excess kurtosis is closest to
//! zero wins (most Gaussian, i.e. best-tracked motion). Chip
//! coefficients and their within-chip neighbor products are pooled over
//! the block and fit with the shared 18 statistics.

use std::collections::VecDeque;

use log::warn;

use crate::config::StChipsConfig;
use crate::error::{Error, Result};
use crate::nss::{self, reflect, GaussianWindow, NSS_FEATURES};
use crate::plane::{downscale2, FramePlane};

/// Chips are 5x5; volumes are 5x5x5.
pub const CHIP_SIDE: usize = 5;
/// Six candidate slice orientations, multiples of pi/6.
pub const N_ORIENTATIONS: usize = 6;
/// Clip-level width: 18 statistics at two scales.
pub const VIDEO_FEATURES: usize = 2 * NSS_FEATURES;
/// Raw frames needed before the first filtered 5-frame block exists:
/// the 5-tap valid-mode filter consumes 4.
pub const MIN_FRAMES: usize = 2 * CHIP_SIDE - 1;

/// 3x3 Sobel gradient magnitude with reflected boundaries; output
/// dimensions match the input.
pub fn sobel_magnitude(plane: &FramePlane) -> Result<FramePlane> {
    let (w, h) = (plane.width(), plane.height());
    if w < 2 || h < 2 {
        return Err(Error::TooSmall(format!("sobel needs at least 2x2, got {h}x{w}")));
    }
    let mut out = FramePlane::zeros(w, h);
    for r in 0..h {
        let rm = plane.row(reflect(r as isize - 1, h));
        let r0 = plane.row(r);
        let rp = plane.row(reflect(r as isize + 1, h));
        for c in 0..w {
            let cm = reflect(c as isize - 1, w);
            let cp = reflect(c as isize + 1, w);
            // Gx = [-1 0 1; -2 0 2; -1 0 1], Gy its transpose.
            let gx = (rm[cp] - rm[cm]) + 2.0 * (r0[cp] - r0[cm]) + (rp[cp] - rp[cm]);
            let gy = (rp[cm] - rm[cm]) + 2.0 * (rp[c] - rm[c]) + (rp[cp] - rm[cp]);
            out.set(r, c, (gx * gx + gy * gy).sqrt());
        }
    }
    Ok(out)
}

/// The 5-tap temporal kernel: t(1 - a t) e^(-2 a t) sampled at t = 0..4,
/// then mean-centered so the filter passes no DC.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalFilter {
    taps: [f64; 5],
}

impl TemporalFilter {
    pub fn new(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidConfig(format!("temporal a = {a} must be positive")));
        }
        let mut taps = Self::raw_taps(a);
        let mean = taps.iter().sum::<f64>() / taps.len() as f64;
        for t in &mut taps {
            *t -= mean;
        }
        Ok(Self { taps })
    }

    /// Kernel samples before mean centering.
    pub fn raw_taps(a: f64) -> [f64; 5] {
        std::array::from_fn(|i| {
            let t = i as f64;
            t * (1.0 - a * t) * (-2.0 * a * t).exp()
        })
    }

    pub fn taps(&self) -> &[f64; 5] {
        &self.taps
    }

    /// Correlate one pixel's trace with the taps (used per-plane below).
    #[inline]
    fn apply(&self, window: &[&FramePlane], i: usize) -> f64 {
        let mut acc = 0.0;
        for (t, &tap) in self.taps.iter().enumerate() {
            acc += tap * window[t].samples()[i];
        }
        acc
    }
}

/// Valid-mode per-pixel correlation of a plane sequence with the taps;
/// the output is 4 frames shorter.
pub fn temporal_bandpass(seq: &[FramePlane], filter: &TemporalFilter) -> Result<Vec<FramePlane>> {
    if seq.len() < 5 {
        return Err(Error::TooFewFrames {
            need: 5,
            got: seq.len(),
        });
    }
    let (w, h) = (seq[0].width(), seq[0].height());
    if seq.iter().any(|p| p.width() != w || p.height() != h) {
        return Err(Error::DimensionMismatch("frame sizes differ across the sequence".into()));
    }
    let mut out = Vec::with_capacity(seq.len() - 4);
    for k in 0..seq.len() - 4 {
        let window: Vec<&FramePlane> = seq[k..k + 5].iter().collect();
        let mut plane = FramePlane::zeros(w, h);
        for i in 0..w * h {
            plane.samples_mut()[i] = filter.apply(&window, i);
        }
        out.push(plane);
    }
    Ok(out)
}

/// Sample offsets of one chip orientation inside the 5x5 spatial face:
/// positions center + s*(-sin, cos) for s = -2..2, rounded to the
/// nearest lattice sample.
pub fn chip_offsets(m: usize) -> [(usize, usize); CHIP_SIDE] {
    assert!(m < N_ORIENTATIONS);
    let theta = m as f64 * std::f64::consts::PI / 6.0;
    let (sin, cos) = theta.sin_cos();
    let center = (CHIP_SIDE / 2) as f64;
    std::array::from_fn(|k| {
        let s = k as f64 - center;
        let row = (center - s * sin).round() as usize;
        let col = (center + s * cos).round() as usize;
        (row, col)
    })
}

/// Pull one oriented chip out of a 5-frame volume at (r0, c0): 5 samples
/// per frame along the oriented line, 25 in total, time-major.
pub fn extract_chip(frames: &[&FramePlane], r0: usize, c0: usize, m: usize) -> [f64; 25] {
    debug_assert_eq!(frames.len(), CHIP_SIDE);
    let offsets = chip_offsets(m);
    let mut chip = [0.0; 25];
    for (t, plane) in frames.iter().enumerate() {
        for (k, &(dr, dc)) in offsets.iter().enumerate() {
            chip[t * CHIP_SIDE + k] = plane.get(r0 + dr, c0 + dc);
        }
    }
    chip
}

/// Choose the volume's chip: the orientation whose samples have excess
/// kurtosis closest to zero; ties prefer the smaller orientation index.
/// Returns None when every orientation is degenerate (zero variance).
pub fn select_chip(frames: &[&FramePlane], r0: usize, c0: usize) -> Option<(usize, [f64; 25])> {
    let mut best: Option<(usize, [f64; 25], f64)> = None;
    for m in 0..N_ORIENTATIONS {
        let chip = extract_chip(frames, r0, c0, m);
        let Ok(kurt) = nss::excess_kurtosis(&chip) else {
            continue;
        };
        let score = kurt.abs();
        match &best {
            Some((_, _, s)) if *s <= score => {}
            _ => best = Some((m, chip, score)),
        }
    }
    best.map(|(m, chip, _)| (m, chip))
}

/// Pooled statistics of one 5-frame filtered block: chips are selected
/// per volume, their coefficients pooled for the GGD fit, and their
/// within-chip neighbor products pooled per product type for the AGGD
/// fits. Returns None when no volume survives or a pooled fit
/// degenerates.
pub fn block_features(filtered: &[FramePlane]) -> Result<Option<[f64; NSS_FEATURES]>> {
    if filtered.len() != CHIP_SIDE {
        return Err(Error::DimensionMismatch(format!(
            "a block holds exactly {CHIP_SIDE} filtered frames, got {}",
            filtered.len()
        )));
    }
    let (w, h) = (filtered[0].width(), filtered[0].height());
    let frames: Vec<&FramePlane> = filtered.iter().collect();

    let mut coeffs: Vec<f64> = Vec::new();
    let mut products: [Vec<f64>; 4] = Default::default();
    let mut r0 = 0;
    while r0 + CHIP_SIDE <= h {
        let mut c0 = 0;
        while c0 + CHIP_SIDE <= w {
            if let Some((_, chip)) = select_chip(&frames, r0, c0) {
                coeffs.extend_from_slice(&chip);
                let plane = FramePlane::new(CHIP_SIDE, CHIP_SIDE, chip.to_vec())?;
                let planes = nss::pairwise_products(&plane)?;
                for (pool, p) in products.iter_mut().zip(planes.iter()) {
                    pool.extend_from_slice(p.samples());
                }
            }
            c0 += CHIP_SIDE;
        }
        r0 += CHIP_SIDE;
    }
    if coeffs.is_empty() {
        return Ok(None);
    }

    let ggd = match nss::fit_ggd(&coeffs) {
        Ok(fit) => fit,
        Err(Error::DegenerateInput(_)) | Err(Error::TooSmall(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut out = [0.0; NSS_FEATURES];
    out[0] = ggd.alpha;
    out[1] = ggd.sigma2;
    for (k, pool) in products.iter().enumerate() {
        let fit = match nss::fit_aggd(pool) {
            Ok(fit) => fit,
            Err(Error::DegenerateInput(_)) | Err(Error::TooSmall(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        out[2 + 4 * k] = fit.eta;
        out[3 + 4 * k] = fit.nu;
        out[4 + 4 * k] = fit.sigma_l2;
        out[5 + 4 * k] = fit.sigma_r2;
    }
    Ok(Some(out))
}

/// Streaming single-scale accumulator: feed scale-specific luma planes,
/// collect averaged block statistics at the end.
struct ChipAccumulator {
    filter: TemporalFilter,
    window: GaussianWindow,
    c: f64,
    ring: VecDeque<FramePlane>,
    pending: Vec<FramePlane>,
    block_sums: [f64; NSS_FEATURES],
    blocks_used: usize,
    blocks_skipped: usize,
}

impl ChipAccumulator {
    fn new(filter: TemporalFilter, c: f64) -> Self {
        Self {
            filter,
            window: GaussianWindow::standard(),
            c,
            ring: VecDeque::with_capacity(CHIP_SIDE),
            pending: Vec::with_capacity(CHIP_SIDE),
            block_sums: [0.0; NSS_FEATURES],
            blocks_used: 0,
            blocks_skipped: 0,
        }
    }

    fn push(&mut self, luma: &FramePlane) -> Result<()> {
        let grad = sobel_magnitude(luma)?;
        let m = nss::mscn(&grad, &self.window, self.c)?;
        self.ring.push_back(m);
        if self.ring.len() < CHIP_SIDE {
            return Ok(());
        }
        // One filtered frame per pushed frame once the ring is warm.
        let window: Vec<&FramePlane> = self.ring.iter().collect();
        let (w, h) = (window[0].width(), window[0].height());
        let mut plane = FramePlane::zeros(w, h);
        for i in 0..w * h {
            plane.samples_mut()[i] = self.filter.apply(&window, i);
        }
        self.ring.pop_front();
        self.pending.push(plane);
        if self.pending.len() == CHIP_SIDE {
            match block_features(&self.pending)? {
                Some(f) => {
                    for (s, v) in self.block_sums.iter_mut().zip(f) {
                        *s += v;
                    }
                    self.blocks_used += 1;
                }
                None => {
                    self.blocks_skipped += 1;
                    warn!("stchips: block with no fittable chips skipped");
                }
            }
            self.pending.clear();
        }
        Ok(())
    }

    fn finish(&self, frames_seen: usize) -> Result<[f64; NSS_FEATURES]> {
        if self.blocks_used == 0 {
            if self.blocks_skipped > 0 {
                return Err(Error::DegenerateInput(
                    "every chip block degenerated (static or structureless video)".into(),
                ));
            }
            return Err(Error::TooFewFrames {
                need: MIN_FRAMES,
                got: frames_seen,
            });
        }
        Ok(std::array::from_fn(|i| {
            self.block_sums[i] / self.blocks_used as f64
        }))
    }
}

/// Two-scale streaming bank.
pub struct StChipsBank {
    scale1: ChipAccumulator,
    scale2: ChipAccumulator,
    frames_seen: usize,
}

impl StChipsBank {
    pub fn new(cfg: &StChipsConfig, c: f64) -> Result<Self> {
        Ok(Self {
            scale1: ChipAccumulator::new(TemporalFilter::new(cfg.temporal_a)?, c),
            scale2: ChipAccumulator::new(TemporalFilter::new(cfg.temporal_a)?, c),
            frames_seen: 0,
        })
    }

    pub fn push(&mut self, luma: &FramePlane) -> Result<()> {
        self.scale1.push(luma)?;
        self.scale2.push(&downscale2(luma)?)?;
        self.frames_seen += 1;
        Ok(())
    }

    /// Averaged block statistics, scale 1 then scale 2.
    pub fn finish(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(VIDEO_FEATURES);
        out.extend(self.scale1.finish(self.frames_seen)?);
        out.extend(self.scale2.finish(self.frames_seen)?);
        Ok(out)
    }
}

/// Whole-clip convenience wrapper over [`StChipsBank`].
pub fn video_features(lumas: &[FramePlane], cfg: &StChipsConfig, c: f64) -> Result<Vec<f64>> {
    if lumas.len() < MIN_FRAMES {
        return Err(Error::TooFewFrames {
            need: MIN_FRAMES,
            got: lumas.len(),
        });
    }
    let mut bank = StChipsBank::new(cfg, c)?;
    for luma in lumas {
        bank.push(luma)?;
    }
    bank.finish()
}
