//! Clip-level feature assembly and the on-disk feature table format.
//!
//! A feature vector concatenates four banks: 37 pristine-distance
//! values, the patch-contrast bank (216 in the full layout, 108 means
//! only in the summary layout), 72 extreme-luminance values, and 36
//! space-time chip values. Device-augmented layouts append one trailing
//! index column. Tables are CSV: a layout record, a column-name record,
//! then one row per video keyed by id.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use crate::config::ToolkitConfig;
use crate::error::{Error, Result};
use crate::hdrmax;
use crate::niqe::{self, NiqeModel};
use crate::patchmax;
use crate::plane::FramePlane;
use crate::stchips::{self, StChipsBank};

/// Feature table schema. The `Tv` variants carry one trailing
/// display-device column appended after training-time augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureLayout {
    FullV1,
    SummaryV1,
    FullV1Tv,
    SummaryV1Tv,
}

impl FeatureLayout {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "full-v1" => Ok(Self::FullV1),
            "summary-v1" => Ok(Self::SummaryV1),
            "full-v1+tv" => Ok(Self::FullV1Tv),
            "summary-v1+tv" => Ok(Self::SummaryV1Tv),
            other => Err(Error::LayoutMismatch {
                expected: "full-v1 | summary-v1 [+tv]".into(),
                found: other.into(),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::FullV1 => "full-v1",
            Self::SummaryV1 => "summary-v1",
            Self::FullV1Tv => "full-v1+tv",
            Self::SummaryV1Tv => "summary-v1+tv",
        }
    }

    pub fn has_device_column(self) -> bool {
        matches!(self, Self::FullV1Tv | Self::SummaryV1Tv)
    }

    /// The layout this one's rows were extracted under.
    pub fn base(self) -> Self {
        match self {
            Self::FullV1 | Self::FullV1Tv => Self::FullV1,
            Self::SummaryV1 | Self::SummaryV1Tv => Self::SummaryV1,
        }
    }

    pub fn with_device(self) -> Self {
        match self.base() {
            Self::FullV1 => Self::FullV1Tv,
            _ => Self::SummaryV1Tv,
        }
    }

    fn patchmax_width(self) -> usize {
        match self.base() {
            Self::FullV1 => patchmax::VIDEO_FEATURES_FULL,
            _ => patchmax::VIDEO_FEATURES_SUMMARY,
        }
    }

    /// Feature count, excluding the video id key.
    pub fn width(self) -> usize {
        niqe::FRAME_FEATURES
            + self.patchmax_width()
            + hdrmax::VIDEO_FEATURES
            + stchips::VIDEO_FEATURES
            + usize::from(self.has_device_column())
    }

    /// Bank name and column range pairs, in row order.
    pub fn bank_ranges(self) -> Vec<(&'static str, Range<usize>)> {
        let mut out = Vec::with_capacity(5);
        let mut at = 0;
        let mut push = |name, len| {
            out.push((name, at..at + len));
            at += len;
        };
        push("niqe", niqe::FRAME_FEATURES);
        push("patchmax", self.patchmax_width());
        push("hdrmax", hdrmax::VIDEO_FEATURES);
        push("stchips", stchips::VIDEO_FEATURES);
        if self.has_device_column() {
            push("tv_index", 1);
        }
        out
    }

    pub fn column_names(self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.width());
        for (bank, range) in self.bank_ranges() {
            if bank == "tv_index" {
                names.push(bank.to_string());
            } else {
                for i in 0..range.len() {
                    names.push(format!("{bank}_{i:03}"));
                }
            }
        }
        names
    }
}

/// Streaming per-clip extractor: push luma frames in display order,
/// collect the finished row once the clip ends.
pub struct FeatureExtractor {
    layout: FeatureLayout,
    patchmax_cfg: crate::config::PatchMaxConfig,
    hdrmax_cfg: crate::config::HdrMaxConfig,
    c: f64,
    model: NiqeModel,
    niqe_sum: Vec<f64>,
    frames: usize,
    patchmax_rows: Vec<Vec<f64>>,
    hdrmax_rows: Vec<Vec<f64>>,
    stchips: StChipsBank,
}

impl FeatureExtractor {
    pub fn new(layout: FeatureLayout, cfg: &ToolkitConfig, model: &NiqeModel) -> Result<Self> {
        if layout.has_device_column() {
            return Err(Error::InvalidConfig(format!(
                "layout {} is an augmented layout; extract under {}",
                layout.name(),
                layout.base().name()
            )));
        }
        Ok(Self {
            layout,
            patchmax_cfg: cfg.patchmax.clone(),
            hdrmax_cfg: cfg.hdrmax.clone(),
            c: cfg.nss.c,
            model: model.clone(),
            niqe_sum: vec![0.0; niqe::FRAME_FEATURES],
            frames: 0,
            patchmax_rows: Vec::new(),
            hdrmax_rows: Vec::new(),
            stchips: StChipsBank::new(&cfg.stchips, cfg.nss.c)?,
        })
    }

    pub fn push(&mut self, luma: &FramePlane) -> Result<()> {
        let nf = niqe::niqe_frame(luma, &self.model, self.c)?;
        for (s, v) in self.niqe_sum.iter_mut().zip(nf) {
            *s += v;
        }
        self.patchmax_rows
            .push(patchmax::frame_features(luma, &self.patchmax_cfg, self.c)?);
        self.hdrmax_rows
            .push(hdrmax::frame_features(luma, &self.hdrmax_cfg, self.c)?);
        self.stchips.push(luma)?;
        self.frames += 1;
        Ok(())
    }

    pub fn finish(&self) -> Result<Vec<f64>> {
        if self.frames < stchips::MIN_FRAMES {
            return Err(Error::TooFewFrames {
                need: stchips::MIN_FRAMES,
                got: self.frames,
            });
        }
        let mut row = Vec::with_capacity(self.layout.width());
        row.extend(self.niqe_sum.iter().map(|s| s / self.frames as f64));
        match self.layout {
            FeatureLayout::FullV1 => {
                row.extend(patchmax::video_features_full(&self.patchmax_rows)?)
            }
            FeatureLayout::SummaryV1 => {
                row.extend(patchmax::video_features_summary(&self.patchmax_rows)?)
            }
            _ => unreachable!("augmented layouts rejected in new()"),
        }
        row.extend(hdrmax::video_features(&self.hdrmax_rows)?);
        row.extend(self.stchips.finish()?);
        debug_assert_eq!(row.len(), self.layout.width());
        if let Some(bad) = row.iter().position(|v| !v.is_finite()) {
            let bank = self
                .layout
                .bank_ranges()
                .into_iter()
                .find(|(_, r)| r.contains(&bad))
                .map(|(n, _)| n)
                .unwrap_or("?");
            return Err(Error::NonFinite(format!(
                "feature {bad} (bank {bank}) is non-finite"
            )));
        }
        Ok(row)
    }
}

/// Whole-clip convenience wrapper over [`FeatureExtractor`].
pub fn extract_video(
    lumas: impl IntoIterator<Item = Result<FramePlane>>,
    layout: FeatureLayout,
    cfg: &ToolkitConfig,
    model: &NiqeModel,
) -> Result<Vec<f64>> {
    let mut extractor = FeatureExtractor::new(layout, cfg, model)?;
    for luma in lumas {
        extractor.push(&luma?)?;
    }
    extractor.finish()
}

/// Feature rows keyed by video id under one layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub layout: FeatureLayout,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn new(layout: FeatureLayout) -> Self {
        Self {
            layout,
            ids: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, id: String, row: Vec<f64>) -> Result<()> {
        if row.len() != self.layout.width() {
            return Err(Error::LayoutMismatch {
                expected: format!("{} ({} columns)", self.layout.name(), self.layout.width()),
                found: format!("row with {} columns", row.len()),
            });
        }
        self.ids.push(id);
        self.rows.push(row);
        Ok(())
    }

    /// Append device indices, switching to the matching augmented layout.
    pub fn augment_device(&self, device_ids: &[u32]) -> Result<Self> {
        if self.layout.has_device_column() {
            return Err(Error::LayoutMismatch {
                expected: self.layout.base().name().into(),
                found: format!("{} (already augmented)", self.layout.name()),
            });
        }
        Ok(Self {
            layout: self.layout.with_device(),
            ids: self.ids.clone(),
            rows: crate::forest::augment_device_index(&self.rows, device_ids)?,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "layout,{}", self.layout.name()).map_err(|e| Error::io(path, e))?;
        let mut header = vec!["video_id".to_string()];
        header.extend(self.layout.column_names());
        writeln!(w, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
        for (id, row) in self.ids.iter().zip(&self.rows) {
            if id.contains(',') || id.contains('"') || id.contains('\n') {
                return Err(Error::Invalid(format!(
                    "video id {id:?} contains CSV metacharacters"
                )));
            }
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{id},{}", cells.join(",")).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(path)
            .map_err(|e| Error::parse(path, e.to_string()))?;
        let mut records = reader.records();
        let layout_rec = records
            .next()
            .ok_or_else(|| Error::parse(path, "empty feature file"))?
            .map_err(|e| Error::parse(path, e.to_string()))?;
        if layout_rec.len() != 2 || &layout_rec[0] != "layout" {
            return Err(Error::parse(
                path,
                "first record must be layout,<name>",
            ));
        }
        let layout = FeatureLayout::parse(&layout_rec[1])?;
        let header = records
            .next()
            .ok_or_else(|| Error::parse(path, "missing column header"))?
            .map_err(|e| Error::parse(path, e.to_string()))?;
        let mut expected = vec!["video_id".to_string()];
        expected.extend(layout.column_names());
        let got: Vec<&str> = header.iter().collect();
        if got != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::LayoutMismatch {
                expected: format!("{} column header", layout.name()),
                found: format!("{} columns with different names", got.len()),
            });
        }
        let mut table = Self::new(layout);
        for (line, rec) in records.enumerate() {
            let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
            if rec.len() != expected.len() {
                return Err(Error::LayoutMismatch {
                    expected: format!("{} cells per row", expected.len()),
                    found: format!("{} cells at row {}", rec.len(), line + 3),
                });
            }
            let id = rec[0].to_string();
            let row: Vec<f64> = rec
                .iter()
                .skip(1)
                .map(|cell| {
                    cell.parse::<f64>()
                        .map_err(|_| Error::parse(path, format!("bad number {cell:?} in row {id:?}")))
                })
                .collect::<Result<_>>()?;
            table.push(id, row)?;
        }
        Ok(table)
    }
}
