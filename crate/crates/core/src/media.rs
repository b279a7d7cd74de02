//! Raw planar YUV420 ingestion and color handling.
//!
//! Clips are headerless `.yuv` files described by a JSON sidecar (same
//! filename with `.json` appended). Decoded planes are normalized to
//! [0, 1] by dividing codes by `2^bit_depth - 1`; limited-range offsets
//! are *not* expanded at decode time, they are handled where a stage
//! needs electro-optical meaning (RGB conversion).

use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use byteorder::{ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane::FramePlane;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PixelFormat {
    #[serde(rename = "yuv420p")]
    Yuv420p,
    #[serde(rename = "yuv420p10le")]
    Yuv420p10le,
}

impl PixelFormat {
    pub fn bit_depth(self) -> u8 {
        match self {
            PixelFormat::Yuv420p => 8,
            PixelFormat::Yuv420p10le => 10,
        }
    }

    pub fn bytes_per_sample(self) -> usize {
        match self {
            PixelFormat::Yuv420p => 1,
            PixelFormat::Yuv420p10le => 2,
        }
    }
}

impl fmt::Display for PixelFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PixelFormat::Yuv420p => write!(f, "yuv420p"),
            PixelFormat::Yuv420p10le => write!(f, "yuv420p10le"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Range {
    Limited,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transfer {
    Pq,
    Bt709,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamut {
    Bt2020,
    Bt709,
}

/// Everything needed to interpret a headerless YUV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub width: usize,
    pub height: usize,
    pub bit_depth: u8,
    pub pixel_format: PixelFormat,
    pub fps: f64,
    pub range: Range,
    pub transfer: Transfer,
    pub gamut: Gamut,
}

impl VideoMeta {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::BadMetadata(format!(
                "frame size {}x{} is empty",
                self.width, self.height
            )));
        }
        if self.bit_depth != self.pixel_format.bit_depth() {
            return Err(Error::BadMetadata(format!(
                "bit_depth {} does not match pixel_format {}",
                self.bit_depth, self.pixel_format
            )));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::BadMetadata(format!("fps {} is not positive", self.fps)));
        }
        Ok(())
    }

    pub fn chroma_width(&self) -> usize {
        (self.width + 1) / 2
    }

    pub fn chroma_height(&self) -> usize {
        (self.height + 1) / 2
    }

    /// Size of one frame on disk.
    pub fn frame_bytes(&self) -> u64 {
        let samples = self.width * self.height + 2 * self.chroma_width() * self.chroma_height();
        (samples * self.pixel_format.bytes_per_sample()) as u64
    }

    /// Largest code the bit depth can hold; normalization divisor.
    pub fn peak_code(&self) -> f64 {
        ((1u32 << self.bit_depth) - 1) as f64
    }

    /// Sidecar convention: the video's full filename with `.json` appended.
    pub fn sidecar_path(video: &Path) -> PathBuf {
        let mut name = video.as_os_str().to_owned();
        name.push(".json");
        PathBuf::from(name)
    }

    pub fn from_sidecar(video: &Path) -> Result<Self> {
        let path = Self::sidecar_path(video);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: VideoMeta =
            serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.to_string()))?;
        meta.validate()?;
        Ok(meta)
    }

    pub fn write_sidecar(&self, video: &Path) -> Result<()> {
        let path = Self::sidecar_path(video);
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::parse(&path, e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// One decoded frame: planes normalized to [0, 1].
#[derive(Debug, Clone)]
pub struct VideoFrame {
    pub y: FramePlane,
    pub u: FramePlane,
    pub v: FramePlane,
}

/// Streaming frame reader over a raw YUV file.
pub struct VideoReader {
    file: BufReader<File>,
    path: PathBuf,
    meta: VideoMeta,
    frame_count: usize,
    next_frame: usize,
    buf: Vec<u8>,
}

impl VideoReader {
    pub fn meta(&self) -> &VideoMeta {
        &self.meta
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    fn decode_plane(&self, offset: usize, width: usize, height: usize) -> FramePlane {
        let n = width * height;
        let peak = self.meta.peak_code();
        let mut samples = Vec::with_capacity(n);
        match self.meta.pixel_format {
            PixelFormat::Yuv420p => {
                for &b in &self.buf[offset..offset + n] {
                    samples.push(b as f64 / peak);
                }
            }
            PixelFormat::Yuv420p10le => {
                for i in 0..n {
                    let code = LittleEndian::read_u16(&self.buf[offset + 2 * i..]);
                    // 10-bit payloads occupy codes 0..=1023; stray high bits clamp.
                    samples.push((code.min(1023)) as f64 / peak);
                }
            }
        }
        FramePlane::new(width, height, samples).expect("plane size computed from meta")
    }
}

impl Iterator for VideoReader {
    type Item = Result<VideoFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next_frame >= self.frame_count {
            return None;
        }
        if let Err(e) = self.file.read_exact(&mut self.buf) {
            self.next_frame = self.frame_count;
            return Some(Err(Error::io(&self.path, e)));
        }
        self.next_frame += 1;
        let (w, h) = (self.meta.width, self.meta.height);
        let (cw, ch) = (self.meta.chroma_width(), self.meta.chroma_height());
        let bps = self.meta.pixel_format.bytes_per_sample();
        let y = self.decode_plane(0, w, h);
        let u = self.decode_plane(w * h * bps, cw, ch);
        let v = self.decode_plane((w * h + cw * ch) * bps, cw, ch);
        Some(Ok(VideoFrame { y, u, v }))
    }
}

/// Open a raw YUV clip for streaming decode.
///
/// The file length must be an exact multiple of the frame size implied by
/// `meta`; anything else is reported with both byte counts.
pub fn open_video(path: &Path, meta: &VideoMeta) -> Result<VideoReader> {
    meta.validate()?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let frame_bytes = meta.frame_bytes();
    if len == 0 || len % frame_bytes != 0 {
        return Err(Error::TruncatedFile {
            path: path.to_owned(),
            actual: len,
            frame_bytes,
            width: meta.width,
            height: meta.height,
            pixel_format: meta.pixel_format.to_string(),
        });
    }
    Ok(VideoReader {
        file: BufReader::new(file),
        path: path.to_owned(),
        meta: meta.clone(),
        frame_count: (len / frame_bytes) as usize,
        next_frame: 0,
        buf: vec![0u8; frame_bytes as usize],
    })
}

/// Luma transfer coefficients (Kr, Kb) per gamut.
fn luma_coefficients(gamut: Gamut) -> (f64, f64) {
    match gamut {
        Gamut::Bt709 => (0.2126, 0.0722),
        Gamut::Bt2020 => (0.2627, 0.0593),
    }
}

/// Convert one decoded frame to full-resolution RGB planes in [0, 1].
///
/// Chroma is upsampled nearest-neighbor (each 2x2 luma block reuses its
/// single chroma sample). Limited-range codes have their offsets removed
/// here; outputs clamp to [0, 1].
pub fn yuv_to_rgb(frame: &VideoFrame, meta: &VideoMeta) -> Result<[FramePlane; 3]> {
    meta.validate()?;
    let (w, h) = (frame.y.width(), frame.y.height());
    if w != meta.width || h != meta.height {
        return Err(Error::DimensionMismatch(format!(
            "frame {}x{} does not match meta {}x{}",
            w, h, meta.width, meta.height
        )));
    }
    let peak = meta.peak_code();
    let scale = (1u32 << (meta.bit_depth - 8)) as f64;
    let (kr, kb) = luma_coefficients(meta.gamut);
    let kg = 1.0 - kr - kb;

    // Map a normalized code back to signal value: luma in [0,1], chroma
    // centered at 0.
    let luma = |v: f64| -> f64 {
        match meta.range {
            Range::Limited => (v * peak - 16.0 * scale) / (219.0 * scale),
            Range::Full => v,
        }
    };
    let chroma = |v: f64| -> f64 {
        match meta.range {
            Range::Limited => (v * peak - 128.0 * scale) / (224.0 * scale),
            Range::Full => v - 0.5,
        }
    };

    let mut r = FramePlane::zeros(w, h);
    let mut g = FramePlane::zeros(w, h);
    let mut b = FramePlane::zeros(w, h);
    for row in 0..h {
        for col in 0..w {
            let yv = luma(frame.y.get(row, col));
            let cb = chroma(frame.u.get(row / 2, col / 2));
            let cr = chroma(frame.v.get(row / 2, col / 2));
            let rv = yv + 2.0 * (1.0 - kr) * cr;
            let bv = yv + 2.0 * (1.0 - kb) * cb;
            // Exact inverse of Y = Kr R + Kg G + Kb B.
            let gv = (yv - kr * rv - kb * bv) / kg;
            r.set(row, col, rv.clamp(0.0, 1.0));
            g.set(row, col, gv.clamp(0.0, 1.0));
            b.set(row, col, bv.clamp(0.0, 1.0));
        }
    }
    Ok([r, g, b])
}

/// Summary emitted by the `probe` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub meta: VideoMeta,
    pub frame_count: usize,
    /// Luma codes outside the nominal range for the declared `range`
    /// (limited: [16, 235] scaled by bit depth; full: the full code range).
    /// Out-of-range codes are tolerated downstream, only flagged here.
    pub luma_code_violations: u64,
}

pub fn probe(path: &Path, meta: &VideoMeta) -> Result<ProbeReport> {
    let reader = open_video(path, meta)?;
    let frame_count = reader.frame_count();
    let peak = meta.peak_code();
    let scale = (1u32 << (meta.bit_depth - 8)) as f64;
    let (lo, hi) = match meta.range {
        Range::Limited => (16.0 * scale, 235.0 * scale),
        Range::Full => (0.0, peak),
    };
    let mut violations = 0u64;
    for frame in reader {
        let frame = frame?;
        for &v in frame.y.samples() {
            let code = v * peak;
            if code < lo - 1e-9 || code > hi + 1e-9 {
                violations += 1;
            }
        }
    }
    Ok(ProbeReport {
        meta: meta.clone(),
        frame_count,
        luma_code_violations: violations,
    })
}

/// Plain 8-bit BT.709 limited-range metadata for in-crate tests.
#[cfg(test)]
pub(crate) fn meta_8bit(width: usize, height: usize) -> VideoMeta {
    VideoMeta {
        width,
        height,
        bit_depth: 8,
        pixel_format: PixelFormat::Yuv420p,
        fps: 30.0,
        range: Range::Limited,
        transfer: Transfer::Bt709,
        gamut: Gamut::Bt709,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_clip(dir: &Path, name: &str, meta: &VideoMeta, bytes: &[u8]) -> PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, bytes).unwrap();
        meta.write_sidecar(&path).unwrap();
        path
    }

    #[test]
    fn decodes_8bit_codes_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let meta = meta_8bit(4, 4);
        // One frame: Y = 0..16, U = 4 x 100, V = 4 x 200.
        let mut bytes: Vec<u8> = (0u8..16).collect();
        bytes.extend_from_slice(&[100; 4]);
        bytes.extend_from_slice(&[200; 4]);
        let path = write_clip(dir.path(), "a.yuv", &meta, &bytes);

        let mut reader = open_video(&path, &meta).unwrap();
        assert_eq!(reader.frame_count(), 1);
        let frame = reader.next().unwrap().unwrap();
        for code in 0..16 {
            assert_eq!(frame.y.samples()[code], code as f64 / 255.0);
        }
        assert_eq!(frame.u.get(1, 1), 100.0 / 255.0);
        assert_eq!(frame.v.get(0, 0), 200.0 / 255.0);
        assert!(reader.next().is_none());
    }

    #[test]
    fn decodes_10bit_little_endian() {
        let dir = tempfile::tempdir().unwrap();
        let meta = VideoMeta {
            width: 2,
            height: 2,
            bit_depth: 10,
            pixel_format: PixelFormat::Yuv420p10le,
            fps: 24.0,
            range: Range::Full,
            transfer: Transfer::Pq,
            gamut: Gamut::Bt2020,
        };
        let codes: [u16; 6] = [0, 512, 1023, 700, 300, 900];
        let mut bytes = Vec::new();
        for c in codes {
            bytes.extend_from_slice(&c.to_le_bytes());
        }
        let path = write_clip(dir.path(), "b.yuv", &meta, &bytes);

        let frame = open_video(&path, &meta).unwrap().next().unwrap().unwrap();
        assert_eq!(frame.y.samples()[0], 0.0);
        assert_eq!(frame.y.samples()[1], 512.0 / 1023.0);
        assert_eq!(frame.y.samples()[2], 1.0);
        assert_eq!(frame.u.get(0, 0), 300.0 / 1023.0);
    }

    #[test]
    fn truncated_file_reports_byte_counts() {
        let dir = tempfile::tempdir().unwrap();
        let meta = meta_8bit(4, 4);
        let path = write_clip(dir.path(), "c.yuv", &meta, &vec![0u8; 25]);
        let msg = match open_video(&path, &meta) {
            Err(e) => e.to_string(),
            Ok(_) => panic!("truncated file opened"),
        };
        assert!(msg.contains("25"), "{msg}");
        assert!(msg.contains("24"), "{msg}");
    }

    #[test]
    fn sidecar_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let meta = meta_8bit(6, 4);
        let video = dir.path().join("d.yuv");
        std::fs::write(&video, vec![0u8; meta.frame_bytes() as usize]).unwrap();
        meta.write_sidecar(&video).unwrap();
        let loaded = VideoMeta::from_sidecar(&video).unwrap();
        assert_eq!(loaded, meta);
    }

    #[test]
    fn meta_rejects_depth_format_mismatch() {
        let mut meta = meta_8bit(4, 4);
        meta.bit_depth = 10;
        assert!(meta.validate().is_err());
    }

    fn gray_frame(meta: &VideoMeta, y: f64, u: f64, v: f64) -> VideoFrame {
        VideoFrame {
            y: FramePlane::from_fn(meta.width, meta.height, |_, _| y),
            u: FramePlane::from_fn(meta.chroma_width(), meta.chroma_height(), |_, _| u),
            v: FramePlane::from_fn(meta.chroma_width(), meta.chroma_height(), |_, _| v),
        }
    }

    #[test]
    fn limited_range_black_maps_to_zero_rgb() {
        for (meta, k) in [
            (meta_8bit(4, 4), 1.0),
            (
                VideoMeta {
                    width: 4,
                    height: 4,
                    bit_depth: 10,
                    pixel_format: PixelFormat::Yuv420p10le,
                    fps: 30.0,
                    range: Range::Limited,
                    transfer: Transfer::Pq,
                    gamut: Gamut::Bt2020,
                },
                4.0,
            ),
        ] {
            let peak = meta.peak_code();
            let frame = gray_frame(&meta, 16.0 * k / peak, 128.0 * k / peak, 128.0 * k / peak);
            let [r, g, b] = yuv_to_rgb(&frame, &meta).unwrap();
            for p in [&r, &g, &b] {
                for &s in p.samples() {
                    assert!(s.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn limited_range_peak_maps_to_unit_rgb() {
        let meta = meta_8bit(4, 4);
        let frame = gray_frame(&meta, 235.0 / 255.0, 128.0 / 255.0, 128.0 / 255.0);
        let [r, g, b] = yuv_to_rgb(&frame, &meta).unwrap();
        for p in [&r, &g, &b] {
            for &s in p.samples() {
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_range_mid_gray_is_neutral() {
        for gamut in [Gamut::Bt709, Gamut::Bt2020] {
            let meta = VideoMeta {
                range: Range::Full,
                gamut,
                ..meta_8bit(4, 4)
            };
            let frame = gray_frame(&meta, 0.5, 0.5, 0.5);
            let [r, g, b] = yuv_to_rgb(&frame, &meta).unwrap();
            for p in [&r, &g, &b] {
                for &s in p.samples() {
                    assert!((s - 0.5).abs() < 1e-12, "gamut {gamut:?}: {s}");
                }
            }
        }
    }

    #[test]
    fn chroma_upsampling_is_nearest_neighbor() {
        let meta = VideoMeta {
            range: Range::Full,
            ..meta_8bit(4, 4)
        };
        // Distinct chroma per 2x2 block; zero luma isolates the chroma path.
        let u = FramePlane::new(2, 2, vec![0.5, 0.6, 0.7, 0.8]).unwrap();
        let frame = VideoFrame {
            y: FramePlane::zeros(4, 4),
            u: u.clone(),
            v: FramePlane::from_fn(2, 2, |_, _| 0.5),
        };
        let [_, _, b] = yuv_to_rgb(&frame, &meta).unwrap();
        // B = Y + 2(1-Kb) Cb: every pixel of a 2x2 block sees the same Cb.
        for row in 0..4 {
            for col in 0..4 {
                let cb = u.get(row / 2, col / 2) - 0.5;
                let expect = (2.0 * (1.0 - 0.0722) * cb).clamp(0.0, 1.0);
                assert!((b.get(row, col) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn probe_counts_out_of_range_luma() {
        let dir = tempfile::tempdir().unwrap();
        let meta = meta_8bit(4, 4);
        // 3 luma codes below 16, 2 above 235, rest legal.
        let mut y = vec![128u8; 16];
        y[0] = 0;
        y[1] = 5;
        y[2] = 15;
        y[3] = 240;
        y[4] = 255;
        let mut bytes = y;
        bytes.extend_from_slice(&[128; 8]);
        let path = write_clip(dir.path(), "e.yuv", &meta, &bytes);
        let report = probe(&path, &meta).unwrap();
        assert_eq!(report.frame_count, 1);
        assert_eq!(report.luma_code_violations, 5);
    }
}
