//! Pristine-model distance features.
//!
//! A frame is tiled into patches; sharp patches (local sigma near the
//! frame maximum) contribute the shared 18 statistics at two scales,
//! giving 36 features per patch. The per-frame output is the 36-long
//! patch mean plus the Mahalanobis-style distance between the frame's
//! patch population Gaussian and a pristine model Gaussian, 37 values
//! in all. The trainer fits that pristine Gaussian over a corpus of
//! clean frames.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::NiqeConfig;
use crate::error::{Error, Result};
use crate::nss::{self, GaussianWindow, NSS_FEATURES};
use crate::plane::{downscale2, FramePlane};

/// Per-patch width: 18 statistics at each of two scales.
pub const PATCH_FEATURES: usize = 2 * NSS_FEATURES;
/// Per-frame output width: patch means plus the model distance.
pub const FRAME_FEATURES: usize = PATCH_FEATURES + 1;
/// Eigenvalue floor when inverting the pooled covariance.
const COV_FLOOR: f64 = 1e-6;
/// Symmetry slack tolerated when validating a loaded covariance.
const SYMMETRY_TOL: f64 = 1e-10;
/// Most negative eigenvalue tolerated (matrices are estimated, so tiny
/// negative values are rounding, anything lower is a broken file).
const EIGEN_TOL: f64 = -1e-8;

/// Pristine patch-population Gaussian plus the extraction settings it
/// was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NiqeModel {
    pub format_version: u32,
    pub patch_size: usize,
    pub sharpness_fraction: f64,
    /// Mean of the 36 patch features.
    pub mu: Vec<f64>,
    /// Row-major 36x36 covariance.
    pub cov: Vec<f64>,
}

impl NiqeModel {
    pub const FORMAT_VERSION: u32 = 1;

    pub fn new(patch_size: usize, sharpness_fraction: f64, mu: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let model = Self {
            format_version: Self::FORMAT_VERSION,
            patch_size,
            sharpness_fraction,
            mu,
            cov,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != Self::FORMAT_VERSION {
            return Err(Error::BadMetadata(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        if self.patch_size < 8 || self.patch_size % 2 != 0 {
            return Err(Error::BadMetadata(format!(
                "model patch size {} must be even and at least 8",
                self.patch_size
            )));
        }
        if !(self.sharpness_fraction.is_finite() && (0.0..=1.0).contains(&self.sharpness_fraction)) {
            return Err(Error::BadMetadata(format!(
                "sharpness fraction {} outside [0, 1]",
                self.sharpness_fraction
            )));
        }
        let n = PATCH_FEATURES;
        if self.mu.len() != n || self.cov.len() != n * n {
            return Err(Error::BadMetadata(format!(
                "model shape {}/{} does not match {n}/{}",
                self.mu.len(),
                self.cov.len(),
                n * n
            )));
        }
        if self.mu.iter().chain(&self.cov).any(|v| !v.is_finite()) {
            return Err(Error::BadMetadata("model contains non-finite values".into()));
        }
        for r in 0..n {
            for c in 0..r {
                if (self.cov[r * n + c] - self.cov[c * n + r]).abs() > SYMMETRY_TOL {
                    return Err(Error::BadMetadata(format!(
                        "covariance asymmetric at ({r}, {c})"
                    )));
                }
            }
        }
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, &self.cov));
        if eig.eigenvalues.iter().any(|&l| l < EIGEN_TOL) {
            return Err(Error::BadMetadata(
                "covariance is not positive semidefinite".into(),
            ));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::parse(path, e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| Error::parse(path, e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// The model compiled into the library, trained on the bundled
    /// procedural pristine frames. Regenerate with the ignored test
    /// `regenerate_bundled_model`.
    pub fn bundled() -> Self {
        let model: Self = serde_json::from_str(include_str!("../data/niqe_model.json"))
            .expect("bundled model parses");
        model.validate().expect("bundled model is well-formed");
        model
    }
}

/// Feature vectors of the sharp patches of one frame. Patches tile the
/// frame on a rigid grid (partial edges dropped); sharpness is the
/// patch mean of the scale-1 local sigma field, and patches within
/// `sharpness_fraction` of the sharpest qualify. Patches whose fits
/// degenerate are dropped.
pub fn frame_patch_features(
    luma: &FramePlane,
    patch_size: usize,
    sharpness_fraction: f64,
    c: f64,
) -> Result<Vec<Vec<f64>>> {
    if patch_size < 8 || patch_size % 2 != 0 {
        return Err(Error::InvalidConfig(format!(
            "patch size {patch_size} must be even and at least 8"
        )));
    }
    let rows = luma.height() / patch_size;
    let cols = luma.width() / patch_size;
    if rows == 0 || cols == 0 {
        return Err(Error::TooSmall(format!(
            "{}x{} frame holds no {patch_size}x{patch_size} patch",
            luma.height(),
            luma.width()
        )));
    }
    let window = GaussianWindow::standard();
    let (m1, _, sigma1) = nss::mscn_with_moments(luma, &window, c)?;
    let half = downscale2(luma)?;
    let m2 = nss::mscn(&half, &window, c)?;

    let mut sharpness = Vec::with_capacity(rows * cols);
    for pr in 0..rows {
        for pc in 0..cols {
            let patch = sigma1.crop(pr * patch_size, pc * patch_size, patch_size, patch_size)?;
            sharpness.push(patch.mean());
        }
    }
    let peak = sharpness.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut selected: Vec<usize> = (0..rows * cols)
        .filter(|&i| sharpness[i] >= sharpness_fraction * peak)
        .collect();
    if selected.is_empty() {
        warn!("niqe: no patch met the sharpness cut, using all patches");
        selected = (0..rows * cols).collect();
    }

    let mut feats = Vec::with_capacity(selected.len());
    for i in selected {
        let (pr, pc) = (i / cols, i % cols);
        let half_size = patch_size / 2;
        let p1 = m1.crop(pr * patch_size, pc * patch_size, patch_size, patch_size)?;
        let p2 = m2.crop(pr * half_size, pc * half_size, half_size, half_size)?;
        let f1 = match nss::nss_features(&p1) {
            Ok(f) => f,
            Err(Error::DegenerateInput(_)) => continue,
            Err(e) => return Err(e),
        };
        let f2 = match nss::nss_features(&p2) {
            Ok(f) => f,
            Err(Error::DegenerateInput(_)) => continue,
            Err(e) => return Err(e),
        };
        let mut v = Vec::with_capacity(PATCH_FEATURES);
        v.extend_from_slice(&f1);
        v.extend_from_slice(&f2);
        feats.push(v);
    }
    if feats.is_empty() {
        return Err(Error::DegenerateInput(
            "no patch has fittable statistics".into(),
        ));
    }
    Ok(feats)
}

/// Mean and population covariance (row-major) of a set of equal-length
/// vectors.
pub fn mean_cov(vectors: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let Some(first) = vectors.first() else {
        return Err(Error::DegenerateInput("no vectors to pool".into()));
    };
    let n = first.len();
    if vectors.iter().any(|v| v.len() != n) {
        return Err(Error::DimensionMismatch("pooled vectors differ in length".into()));
    }
    let count = vectors.len() as f64;
    let mut mu = vec![0.0; n];
    for v in vectors {
        for (m, x) in mu.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mu {
        *m /= count;
    }
    let mut cov = vec![0.0; n * n];
    for v in vectors {
        for r in 0..n {
            let dr = v[r] - mu[r];
            for c in r..n {
                cov[r * n + c] += dr * (v[c] - mu[c]);
            }
        }
    }
    for r in 0..n {
        for c in r..n {
            let val = cov[r * n + c] / count;
            cov[r * n + c] = val;
            cov[c * n + r] = val;
        }
    }
    Ok((mu, cov))
}

/// Distance between two Gaussians over the same space: the quadratic
/// form of the mean difference under the inverse of the averaged
/// covariance, eigenvalues floored for stability. Symmetric in its
/// arguments and zero when the means coincide.
pub fn gaussian_distance(mu_a: &[f64], cov_a: &[f64], mu_b: &[f64], cov_b: &[f64]) -> Result<f64> {
    let n = mu_a.len();
    if mu_b.len() != n || cov_a.len() != n * n || cov_b.len() != n * n {
        return Err(Error::DimensionMismatch(
            "Gaussian parameter shapes disagree".into(),
        ));
    }
    let pooled: Vec<f64> = cov_a
        .iter()
        .zip(cov_b)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, &pooled));
    let d = DVector::from_iterator(n, mu_a.iter().zip(mu_b).map(|(a, b)| a - b));
    let mut acc = 0.0;
    for i in 0..n {
        let proj = eig.eigenvectors.column(i).dot(&d);
        acc += proj * proj / eig.eigenvalues[i].max(COV_FLOOR);
    }
    Ok(acc.sqrt())
}

/// The 37 per-frame values: mean sharp-patch features, then the
/// distance from the frame's patch population to the pristine model.
pub fn niqe_frame(luma: &FramePlane, model: &NiqeModel, c: f64) -> Result<Vec<f64>> {
    let patches = frame_patch_features(luma, model.patch_size, model.sharpness_fraction, c)?;
    let (nu, sigma_f) = mean_cov(&patches)?;
    let dist = gaussian_distance(&nu, &sigma_f, &model.mu, &model.cov)?;
    let mut out = nu;
    out.push(dist);
    Ok(out)
}

/// Fit the pristine Gaussian over a corpus of clean frames: sharp-patch
/// features pooled across every frame, then mean and covariance.
pub fn train_pristine_model(
    frames: &[FramePlane],
    cfg: &NiqeConfig,
    c: f64,
) -> Result<NiqeModel> {
    if frames.len() < 10 {
        return Err(Error::TooFewFrames {
            need: 10,
            got: frames.len(),
        });
    }
    let per_frame: Vec<Result<Vec<Vec<f64>>>> = frames
        .par_iter()
        .map(|f| frame_patch_features(f, cfg.patch_size, cfg.sharpness_fraction, c))
        .collect();
    let mut pooled = Vec::new();
    for r in per_frame {
        pooled.extend(r?);
    }
    if pooled.len() < 2 {
        return Err(Error::DegenerateInput(
            "corpus yields fewer than two usable patches".into(),
        ));
    }
    let (mu, cov) = mean_cov(&pooled)?;
    NiqeModel::new(cfg.patch_size, cfg.sharpness_fraction, mu, cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nss::DEFAULT_C;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_frame(seed: u64, w: usize, h: usize) -> FramePlane {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FramePlane::from_fn(w, h, |_, _| rng.gen_range(0.0..1.0))
    }

    /// 2x2 box blur with replication, enough to wreck fine structure.
    fn crush(frame: &FramePlane) -> FramePlane {
        let half = downscale2(frame).unwrap();
        FramePlane::from_fn(frame.width(), frame.height(), |r, c| {
            half.get((r / 2).min(half.height() - 1), (c / 2).min(half.width() - 1))
        })
    }

    fn tiny_cfg() -> NiqeConfig {
        NiqeConfig {
            patch_size: 16,
            sharpness_fraction: 0.75,
        }
    }

    fn tiny_model() -> NiqeModel {
        let frames: Vec<FramePlane> = (0..10).map(|i| noise_frame(1000 + i, 64, 64)).collect();
        train_pristine_model(&frames, &tiny_cfg(), DEFAULT_C).unwrap()
    }

    #[test]
    fn frame_output_is_37_finite_values() {
        let model = tiny_model();
        let out = niqe_frame(&noise_frame(5, 64, 64), &model, DEFAULT_C).unwrap();
        assert_eq!(out.len(), FRAME_FEATURES);
        assert!(out.iter().all(|v| v.is_finite()));
        assert!(out[FRAME_FEATURES - 1] >= 0.0);
    }

    #[test]
    fn whole_frame_patch_equals_direct_statistics() {
        // A frame exactly one patch in size must reproduce the shared
        // statistics verbatim at both scales.
        let frame = noise_frame(9, 32, 32);
        let feats = frame_patch_features(&frame, 32, 0.75, DEFAULT_C).unwrap();
        assert_eq!(feats.len(), 1);
        let window = GaussianWindow::standard();
        let f1 = nss::nss_features(&nss::mscn(&frame, &window, DEFAULT_C).unwrap()).unwrap();
        let f2 = nss::nss_features(
            &nss::mscn(&downscale2(&frame).unwrap(), &window, DEFAULT_C).unwrap(),
        )
        .unwrap();
        for (a, b) in feats[0].iter().zip(f1.iter().chain(f2.iter())) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn self_model_distance_is_zero() {
        let frame = noise_frame(21, 64, 64);
        let patches = frame_patch_features(&frame, 16, 0.75, DEFAULT_C).unwrap();
        let (mu, cov) = mean_cov(&patches).unwrap();
        let model = NiqeModel::new(16, 0.75, mu, cov).unwrap();
        let out = niqe_frame(&frame, &model, DEFAULT_C).unwrap();
        assert_eq!(out[FRAME_FEATURES - 1], 0.0);
    }

    #[test]
    fn distance_is_symmetric() {
        let a = frame_patch_features(&noise_frame(31, 64, 64), 16, 0.75, DEFAULT_C).unwrap();
        let b = frame_patch_features(&noise_frame(32, 64, 64), 16, 0.75, DEFAULT_C).unwrap();
        let (mu_a, cov_a) = mean_cov(&a).unwrap();
        let (mu_b, cov_b) = mean_cov(&b).unwrap();
        let ab = gaussian_distance(&mu_a, &cov_a, &mu_b, &cov_b).unwrap();
        let ba = gaussian_distance(&mu_b, &cov_b, &mu_a, &cov_a).unwrap();
        assert_eq!(ab, ba);
        assert!(ab > 0.0);
    }

    #[test]
    fn pristine_frames_sit_closer_than_crushed_ones() {
        let model = tiny_model();
        let held_out = noise_frame(77, 64, 64);
        let clean = niqe_frame(&held_out, &model, DEFAULT_C).unwrap()[FRAME_FEATURES - 1];
        let blurred = niqe_frame(&crush(&held_out), &model, DEFAULT_C).unwrap()[FRAME_FEATURES - 1];
        assert!(
            clean < blurred,
            "clean {clean} should beat blurred {blurred}"
        );
    }

    #[test]
    fn repeated_frame_corpus_reproduces_within_frame_covariance() {
        let frame = noise_frame(41, 64, 64);
        let frames: Vec<FramePlane> = (0..10).map(|_| frame.clone()).collect();
        let model = train_pristine_model(&frames, &tiny_cfg(), DEFAULT_C).unwrap();
        let patches = frame_patch_features(&frame, 16, 0.75, DEFAULT_C).unwrap();
        let (mu, cov) = mean_cov(&patches).unwrap();
        for (a, b) in model.mu.iter().zip(&mu) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in model.cov.iter().zip(&cov) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn model_round_trip_is_bitwise() {
        let model = tiny_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let loaded = NiqeModel::load(&path).unwrap();
        assert_eq!(model, loaded);
        let frame = noise_frame(55, 64, 64);
        let a = niqe_frame(&frame, &model, DEFAULT_C).unwrap();
        let b = niqe_frame(&frame, &loaded, DEFAULT_C).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn asymmetric_covariance_is_rejected() {
        let mut model = tiny_model();
        model.cov[1] += 1e-6;
        let err = model.validate().unwrap_err();
        assert!(matches!(err, Error::BadMetadata(_)), "{err}");
    }

    #[test]
    fn small_corpus_is_an_error() {
        let frames: Vec<FramePlane> = (0..9).map(|i| noise_frame(i, 64, 64)).collect();
        assert!(matches!(
            train_pristine_model(&frames, &tiny_cfg(), DEFAULT_C),
            Err(Error::TooFewFrames { need: 10, got: 9 })
        ));
    }

    #[test]
    fn undersized_frame_is_an_error() {
        let model = tiny_model();
        let err = niqe_frame(&noise_frame(3, 12, 12), &model, DEFAULT_C).unwrap_err();
        assert!(matches!(err, Error::TooSmall(_)), "{err}");
    }

    #[test]
    fn bundled_model_is_well_formed_and_ordered() {
        let model = NiqeModel::bundled();
        assert_eq!(model.patch_size, NiqeConfig::default().patch_size);
        // A pristine-style frame should sit closer to the model than its
        // structurally crushed copy.
        let frame = crate::synth::pristine_frames(555, 1, 192, 192).remove(0);
        let near = niqe_frame(&frame, &model, DEFAULT_C).unwrap();
        let far = niqe_frame(&crush(&frame), &model, DEFAULT_C).unwrap();
        assert!(
            near[FRAME_FEATURES - 1] < far[FRAME_FEATURES - 1],
            "{} !< {}",
            near[FRAME_FEATURES - 1],
            far[FRAME_FEATURES - 1]
        );
    }

    #[test]
    #[ignore = "rewrites the bundled model artifact in the source tree"]
    fn regenerate_bundled_model() {
        let frames = crate::synth::pristine_frames(2023, 24, 384, 384);
        let model = train_pristine_model(&frames, &NiqeConfig::default(), DEFAULT_C).unwrap();
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/niqe_model.json");
        model.save(&path).unwrap();
    }
}
