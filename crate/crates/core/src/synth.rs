//! Seeded procedural clips for tests, benchmarks, and the bundled demo
//! corpus.
//!
//! Content is multi-octave value noise advected by a constant velocity,
//! so clips have natural-looking spatial spectra and nonzero motion
//! while staying bitwise reproducible from a seed. Distortions model
//! the usual impairment families: blur, sensor noise, and coarse
//! quantization (banding).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::media::VideoMeta;
use crate::nss::{local_moments, GaussianWindow};
use crate::plane::FramePlane;

/// Luma band the pristine generator emits; leaves headroom inside the
/// legal limited-range band so mild distortions stay legal too.
pub const LUMA_LO: f64 = 0.15;
pub const LUMA_HI: f64 = 0.85;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Lattice hash in [0, 1).
fn lattice(seed: u64, x: i64, y: i64) -> f64 {
    let h = splitmix64(
        seed ^ (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F),
    );
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Smoothstep-blended value noise in [0, 1).
fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (xi, yi) = (x0 as i64, y0 as i64);
    let (tx, ty) = (smoothstep(x - x0), smoothstep(y - y0));
    let v00 = lattice(seed, xi, yi);
    let v10 = lattice(seed, xi + 1, yi);
    let v01 = lattice(seed, xi, yi + 1);
    let v11 = lattice(seed, xi + 1, yi + 1);
    let top = v00 + (v10 - v00) * tx;
    let bot = v01 + (v11 - v01) * tx;
    top + (bot - top) * ty
}

/// One procedural scene: a drifting multi-octave noise field.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// Octave count; each octave doubles frequency and halves weight.
    pub octaves: u32,
    /// Base lattice cells across the width.
    pub cells: f64,
    /// Lattice units of drift per frame.
    pub velocity: (f64, f64),
}

impl ContentSpec {
    fn sample(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        let mut amp = 1.0;
        let mut freq = 1.0;
        let mut norm = 0.0;
        for o in 0..self.octaves {
            acc += amp * value_noise(self.seed.wrapping_add(o as u64), x * freq, y * freq);
            norm += amp;
            amp *= 0.5;
            freq *= 2.0;
        }
        LUMA_LO + (LUMA_HI - LUMA_LO) * (acc / norm)
    }

    pub fn frame(&self, t: usize) -> FramePlane {
        let scale = self.cells / self.width as f64;
        let (vx, vy) = self.velocity;
        let (dx, dy) = (t as f64 * vx, t as f64 * vy);
        FramePlane::from_fn(self.width, self.height, |r, c| {
            self.sample(c as f64 * scale + dx, r as f64 * scale + dy)
        })
    }

    pub fn lumas(&self) -> Vec<FramePlane> {
        (0..self.frames).map(|t| self.frame(t)).collect()
    }
}

/// Impairment applied to a pristine clip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distortion {
    Pristine,
    GaussianBlur { sigma: f64 },
    Awgn { sigma: f64 },
    /// Luma codes snapped to multiples of `step` on the 8-bit scale;
    /// large steps inject banding.
    Quantize { step: u32 },
}

impl Distortion {
    pub fn apply(&self, lumas: &[FramePlane], seed: u64) -> Result<Vec<FramePlane>> {
        match *self {
            Distortion::Pristine => Ok(lumas.to_vec()),
            Distortion::GaussianBlur { sigma } => {
                if sigma <= 0.0 {
                    return Err(Error::InvalidConfig(format!("blur sigma {sigma} must be > 0")));
                }
                let half = (3.0 * sigma).ceil().max(1.0) as usize;
                let window = GaussianWindow::new(half, sigma)?;
                lumas
                    .iter()
                    .map(|l| Ok(local_moments(l, &window)?.0))
                    .collect()
            }
            Distortion::Awgn { sigma } => {
                if sigma <= 0.0 {
                    return Err(Error::InvalidConfig(format!("noise sigma {sigma} must be > 0")));
                }
                let normal = Normal::new(0.0, sigma)
                    .map_err(|e| Error::InvalidConfig(format!("noise sigma {sigma}: {e}")))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(lumas
                    .iter()
                    .map(|l| {
                        FramePlane::from_fn(l.width(), l.height(), |r, c| {
                            (l.get(r, c) + normal.sample(&mut rng)).clamp(0.0, 1.0)
                        })
                    })
                    .collect())
            }
            Distortion::Quantize { step } => {
                if step == 0 || step > 128 {
                    return Err(Error::InvalidConfig(format!(
                        "quantize step {step} outside 1..=128"
                    )));
                }
                let step = step as f64;
                Ok(lumas
                    .iter()
                    .map(|l| {
                        FramePlane::from_fn(l.width(), l.height(), |r, c| {
                            ((l.get(r, c) * 255.0 / step).round() * step / 255.0).clamp(0.0, 1.0)
                        })
                    })
                    .collect())
            }
        }
    }
}

/// Write luma planes as a raw 4:2:0 file with neutral chroma, plus the
/// metadata sidecar next to it.
pub fn write_video(path: &Path, meta: &VideoMeta, lumas: &[FramePlane]) -> Result<()> {
    meta.validate()?;
    if lumas.is_empty() {
        return Err(Error::Invalid("cannot write a zero-frame clip".into()));
    }
    for l in lumas {
        if l.width() != meta.width || l.height() != meta.height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} luma plane under {}x{} metadata",
                l.height(),
                l.width(),
                meta.height,
                meta.width
            )));
        }
    }
    let peak = meta.peak_code();
    let neutral = 1u16 << (meta.bit_depth - 1);
    let chroma_samples = meta.chroma_width() * meta.chroma_height();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let wide = meta.pixel_format.bytes_per_sample() == 2;
    for l in lumas {
        for &v in l.samples() {
            let code = (v * peak).round().clamp(0.0, peak) as u16;
            if wide {
                w.write_u16::<LittleEndian>(code).map_err(|e| Error::io(path, e))?;
            } else {
                w.write_u8(code as u8).map_err(|e| Error::io(path, e))?;
            }
        }
        for _ in 0..2 * chroma_samples {
            if wide {
                w.write_u16::<LittleEndian>(neutral).map_err(|e| Error::io(path, e))?;
            } else {
                w.write_u8(neutral as u8).map_err(|e| Error::io(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    meta.write_sidecar(path)
}

/// One clip of the demo corpus: a content at one impairment level, with
/// a planted opinion score that decays monotonically in the level.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusClip {
    pub id: String,
    pub content: String,
    pub spec: ContentSpec,
    pub level: usize,
    pub distortion: Distortion,
    pub mos: f64,
}

impl CorpusClip {
    pub fn lumas(&self) -> Result<Vec<FramePlane>> {
        self.distortion
            .apply(&self.spec.lumas(), splitmix64(self.spec.seed ^ self.level as u64))
    }
}

/// Demo corpus shape: `contents` scenes, each at `levels` impairment
/// levels (level 0 pristine), cycling distortion family by scene.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub seed: u64,
    pub contents: usize,
    pub levels: usize,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
}

impl CorpusSpec {
    pub fn demo(seed: u64) -> Self {
        Self {
            seed,
            contents: 10,
            levels: 4,
            width: 128,
            height: 128,
            frames: 10,
        }
    }

    pub fn clips(&self) -> Result<Vec<CorpusClip>> {
        if self.contents == 0 || self.levels < 2 {
            return Err(Error::InvalidConfig(
                "corpus needs at least one content and two levels".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut clips = Vec::with_capacity(self.contents * self.levels);
        for ci in 0..self.contents {
            let spec = ContentSpec {
                seed: splitmix64(self.seed.wrapping_add(ci as u64)),
                width: self.width,
                height: self.height,
                frames: self.frames,
                octaves: 4,
                cells: 4.0 + (ci % 4) as f64,
                velocity: (
                    0.02 + 0.015 * (ci % 3) as f64,
                    0.01 + 0.02 * (ci % 2) as f64,
                ),
            };
            let base = rng.gen_range(89.0..91.0);
            for level in 0..self.levels {
                let l = level as f64;
                let distortion = if level == 0 {
                    Distortion::Pristine
                } else {
                    match ci % 3 {
                        0 => Distortion::GaussianBlur { sigma: 1.1 * l + 0.2 },
                        1 => Distortion::Awgn { sigma: 0.03 * l * l.sqrt() },
                        _ => Distortion::Quantize { step: 3 << level },
                    }
                };
                let mos = (base - 20.0 * l + rng.gen_range(-1.0..1.0)).clamp(5.0, 95.0);
                clips.push(CorpusClip {
                    id: format!("c{ci:02}_l{level}"),
                    content: format!("c{ci:02}"),
                    spec: spec.clone(),
                    level,
                    distortion,
                    mos,
                });
            }
        }
        Ok(clips)
    }
}

/// Diverse still frames for pristine-statistics model training.
pub fn pristine_frames(seed: u64, count: usize, width: usize, height: usize) -> Vec<FramePlane> {
    (0..count)
        .map(|i| {
            let spec = ContentSpec {
                seed: splitmix64(seed.wrapping_add(i as u64).wrapping_mul(0x2545_F491_4F6C_DD1D)),
                width,
                height,
                frames: 1,
                octaves: 5,
                cells: 3.0 + (i % 5) as f64,
                velocity: (0.0, 0.0),
            };
            spec.frame(0)
        })
        .collect()
}
