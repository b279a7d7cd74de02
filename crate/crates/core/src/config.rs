//! Toolkit configuration: one TOML file, sections per feature bank plus
//! the regressor. Every field has the calibrated default, so an empty
//! file (or no file) is a valid configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NssConfig {
    /// Stabilizing constant in the MSCN denominator, calibrated for
    /// luma normalized to [0, 1].
    pub c: f64,
}

impl Default for NssConfig {
    fn default() -> Self {
        Self { c: 1.0 / 255.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchMaxConfig {
    /// Square patch side in pixels, applied at every scale.
    pub patch_size: usize,
    /// Percentile T: the top and bottom ceil(n*T/100) patches by mean
    /// local deviation form the high- and low-contrast groups.
    pub percentile: f64,
}

impl Default for PatchMaxConfig {
    fn default() -> Self {
        Self {
            patch_size: 20,
            percentile: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HdrMaxConfig {
    /// Side of the overlapping analysis window.
    pub window: usize,
    /// Output cell stride; must divide `window`.
    pub stride: usize,
    /// Gain of the expansive nonlinearity.
    pub delta: f64,
}

impl Default for HdrMaxConfig {
    fn default() -> Self {
        Self {
            window: 20,
            stride: 10,
            delta: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StChipsConfig {
    /// Decay parameter of the temporal bandpass kernel t(1-at)e^(-2at).
    pub temporal_a: f64,
}

impl Default for StChipsConfig {
    fn default() -> Self {
        Self { temporal_a: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NiqeConfig {
    /// Patch side at full scale; halves at the second scale.
    pub patch_size: usize,
    /// Fraction of the maximum patch sharpness a patch must reach to be
    /// selected.
    pub sharpness_fraction: f64,
}

impl Default for NiqeConfig {
    fn default() -> Self {
        Self {
            patch_size: 96,
            sharpness_fraction: 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// floor(sqrt(p)) candidate features per split.
    Sqrt,
    /// floor(p/3) candidate features per split.
    OneThird,
    /// Every feature considered at every split.
    All,
}

impl MaxFeatures {
    pub fn count(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::OneThird => n_features / 3,
            MaxFeatures::All => n_features,
        };
        k.clamp(1, n_features)
    }
}

impl std::fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaxFeatures::Sqrt => write!(f, "sqrt"),
            MaxFeatures::OneThird => write!(f, "one_third"),
            MaxFeatures::All => write!(f, "all"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressorConfig {
    /// Cross-validated grid of forest sizes.
    pub n_estimators: Vec<usize>,
    /// Cross-validated grid of per-split feature subsampling modes.
    pub max_features: Vec<MaxFeatures>,
    pub cv_folds: usize,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self {
            n_estimators: vec![50, 100, 200],
            max_features: vec![MaxFeatures::Sqrt, MaxFeatures::OneThird, MaxFeatures::All],
            cv_folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    /// Feature file layout: "full-v1" carries patch-contrast temporal
    /// deviations, "summary-v1" keeps the temporal means only.
    pub layout: String,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        Self {
            layout: "full-v1".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolkitConfig {
    pub nss: NssConfig,
    pub patchmax: PatchMaxConfig,
    pub hdrmax: HdrMaxConfig,
    pub stchips: StChipsConfig,
    pub niqe: NiqeConfig,
    pub regressor: RegressorConfig,
    pub features: FeaturesConfig,
}

impl ToolkitConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ToolkitConfig =
            toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply one `section.key=value` override on top of the current
    /// values. The value is parsed as TOML; bare words fall back to
    /// strings so `features.layout=summary-v1` needs no quotes. Only
    /// existing keys can be set. Callers validate once after the last
    /// override, since intermediate states may be inconsistent.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("override {assignment:?} is not key=value")))?;
        let (path, raw) = (path.trim(), raw.trim());
        let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
            Ok(mut t) => t.remove("v").unwrap(),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        let mut root = toml::Value::try_from(&self)
            .map_err(|e| Error::InvalidConfig(format!("config serialization: {e}")))?;
        let mut node = &mut root;
        let parts: Vec<&str> = path.split('.').collect();
        let (&last, dirs) = parts.split_last().unwrap();
        for &part in dirs {
            node = node
                .get_mut(part)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown config key {path:?}")))?;
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("unknown config key {path:?}")))?;
        if !table.contains_key(last) {
            return Err(Error::InvalidConfig(format!("unknown config key {path:?}")));
        }
        table.insert(last.to_string(), value);
        *self = root
            .try_into()
            .map_err(|e| Error::InvalidConfig(format!("override {path:?}: {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nss.c.is_finite() && self.nss.c > 0.0) {
            return Err(Error::InvalidConfig(format!("nss.c = {} must be positive", self.nss.c)));
        }
        if self.patchmax.patch_size < 4 {
            return Err(Error::InvalidConfig(format!(
                "patchmax.patch_size = {} is too small to fit statistics",
                self.patchmax.patch_size
            )));
        }
        if !(self.patchmax.percentile > 0.0 && self.patchmax.percentile <= 50.0) {
            return Err(Error::InvalidConfig(format!(
                "patchmax.percentile = {} must lie in (0, 50]",
                self.patchmax.percentile
            )));
        }
        if self.hdrmax.stride == 0 || self.hdrmax.window % self.hdrmax.stride != 0 {
            return Err(Error::InvalidConfig(format!(
                "hdrmax.stride = {} must divide hdrmax.window = {}",
                self.hdrmax.stride, self.hdrmax.window
            )));
        }
        if !(self.hdrmax.delta.is_finite() && self.hdrmax.delta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "hdrmax.delta = {} must be positive",
                self.hdrmax.delta
            )));
        }
        if !(self.stchips.temporal_a.is_finite() && self.stchips.temporal_a > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "stchips.temporal_a = {} must be positive",
                self.stchips.temporal_a
            )));
        }
        if self.niqe.patch_size < 8 || self.niqe.patch_size % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "niqe.patch_size = {} must be even and at least 8",
                self.niqe.patch_size
            )));
        }
        if !(self.niqe.sharpness_fraction >= 0.0 && self.niqe.sharpness_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "niqe.sharpness_fraction = {} must lie in [0, 1]",
                self.niqe.sharpness_fraction
            )));
        }
        if self.regressor.n_estimators.is_empty()
            || self.regressor.n_estimators.iter().any(|&n| n == 0)
        {
            return Err(Error::InvalidConfig(
                "regressor.n_estimators must list positive forest sizes".into(),
            ));
        }
        if self.regressor.max_features.is_empty() {
            return Err(Error::InvalidConfig(
                "regressor.max_features must list at least one mode".into(),
            ));
        }
        if self.regressor.cv_folds < 2 {
            return Err(Error::InvalidConfig(format!(
                "regressor.cv_folds = {} must be at least 2",
                self.regressor.cv_folds
            )));
        }
        if self.features.layout != "full-v1" && self.features.layout != "summary-v1" {
            return Err(Error::InvalidConfig(format!(
                "features.layout = {:?} is not a known layout",
                self.features.layout
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ToolkitConfig::default().validate().unwrap();
    }

    #[test]
    fn empty_toml_is_all_defaults() {
        let cfg: ToolkitConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, ToolkitConfig::default());
        assert_eq!(cfg.patchmax.patch_size, 20);
        assert_eq!(cfg.patchmax.percentile, 10.0);
        assert_eq!(cfg.hdrmax.window, 20);
        assert_eq!(cfg.hdrmax.stride, 10);
        assert_eq!(cfg.hdrmax.delta, 4.0);
        assert_eq!(cfg.stchips.temporal_a, 0.5);
        assert_eq!(cfg.niqe.patch_size, 96);
        assert_eq!(cfg.niqe.sharpness_fraction, 0.75);
        assert_eq!(cfg.regressor.n_estimators, vec![50, 100, 200]);
        assert_eq!(cfg.regressor.cv_folds, 5);
        assert!((cfg.nss.c - 1.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn partial_section_overrides() {
        let cfg: ToolkitConfig = toml::from_str("[patchmax]\npatch_size = 32\n").unwrap();
        assert_eq!(cfg.patchmax.patch_size, 32);
        assert_eq!(cfg.patchmax.percentile, 10.0);
    }

    #[test]
    fn stride_must_divide_window() {
        let cfg: ToolkitConfig = toml::from_str("[hdrmax]\nwindow = 20\nstride = 7\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<ToolkitConfig>("[patchmax]\npatchsize = 3\n").is_err());
    }

    #[test]
    fn overrides_set_existing_keys_only() {
        let mut cfg = ToolkitConfig::default();
        cfg.apply_override("patchmax.patch_size=32").unwrap();
        assert_eq!(cfg.patchmax.patch_size, 32);
        cfg.apply_override("regressor.n_estimators = [25, 75]").unwrap();
        assert_eq!(cfg.regressor.n_estimators, vec![25, 75]);
        cfg.apply_override("regressor.max_features=[\"sqrt\"]").unwrap();
        assert_eq!(cfg.regressor.max_features, vec![MaxFeatures::Sqrt]);
        // Bare words parse as strings without quoting.
        cfg.apply_override("features.layout=summary-v1").unwrap();
        assert_eq!(cfg.features.layout, "summary-v1");
        cfg.validate().unwrap();
        assert!(matches!(
            cfg.apply_override("patchmax.patchsize=3"),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            cfg.apply_override("patchmax.patch_size=fast"),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(cfg.apply_override("nonsense"), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn max_features_counts() {
        assert_eq!(MaxFeatures::Sqrt.count(361), 19);
        assert_eq!(MaxFeatures::OneThird.count(361), 120);
        assert_eq!(MaxFeatures::All.count(361), 361);
        assert_eq!(MaxFeatures::Sqrt.count(1), 1);
    }
}
