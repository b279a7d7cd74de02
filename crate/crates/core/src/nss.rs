//! Natural scene statistics: local luminance normalization and
//! generalized Gaussian fits.
//!
//! Every feature bank in the crate funnels through this module: MSCN
//! coefficients (locally mean-subtracted, contrast-normalized luma),
//! index-shifted pairwise products, and moment-matching estimators for
//! the generalized Gaussian (GGD) and asymmetric generalized Gaussian
//! (AGGD) families. Moment estimators are population (biased) throughout.

use once_cell::sync::Lazy;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::plane::FramePlane;

/// Normalization constant added to the local deviation denominator.
/// Calibrated for luma in [0, 1]; override via `NssConfig`.
pub const DEFAULT_C: f64 = 1.0 / 255.0;

/// Circularly symmetric Gaussian weighting window, sampled at integer
/// offsets and rescaled to unit sum.
#[derive(Debug, Clone)]
pub struct GaussianWindow {
    half_width: usize,
    weights_1d: Vec<f64>,
}

impl GaussianWindow {
    pub fn new(half_width: usize, sigma: f64) -> Result<Self> {
        if half_width == 0 {
            return Err(Error::InvalidConfig("window half width must be positive".into()));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidConfig(format!("window sigma {sigma} must be positive")));
        }
        let mut weights_1d = Vec::with_capacity(2 * half_width + 1);
        for m in -(half_width as isize)..=(half_width as isize) {
            let d = m as f64;
            weights_1d.push((-d * d / (2.0 * sigma * sigma)).exp());
        }
        let sum: f64 = weights_1d.iter().sum();
        for w in &mut weights_1d {
            *w /= sum;
        }
        Ok(Self {
            half_width,
            weights_1d,
        })
    }

    /// The window used by every bank: half width 3 (7x7 support) with
    /// sigma 7/6, which keeps the sampled extent within three standard
    /// deviations before renormalization.
    pub fn standard() -> Self {
        Self::new(3, 7.0 / 6.0).expect("standard window parameters are valid")
    }

    #[inline]
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    #[inline]
    pub fn size(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn weights_1d(&self) -> &[f64] {
        &self.weights_1d
    }

    /// Full 2D weight grid (the product of the 1D samples); sums to 1.
    pub fn weights_2d(&self) -> Vec<f64> {
        let k = self.size();
        let mut out = Vec::with_capacity(k * k);
        for a in 0..k {
            for b in 0..k {
                out.push(self.weights_1d[a] * self.weights_1d[b]);
            }
        }
        out
    }
}

/// Symmetric (half-sample) boundary reflection: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// 1D weighted sum along rows (horizontal), reflected boundaries.
fn pass_rows(plane: &FramePlane, window: &GaussianWindow) -> FramePlane {
    let (w, h) = (plane.width(), plane.height());
    let hw = window.half_width() as isize;
    let wt = window.weights_1d();
    let mut out = FramePlane::zeros(w, h);
    for r in 0..h {
        let row = plane.row(r);
        for c in 0..w {
            let mut acc = 0.0;
            for (k, &wk) in wt.iter().enumerate() {
                let cc = reflect(c as isize + k as isize - hw, w);
                acc += wk * row[cc];
            }
            out.set(r, c, acc);
        }
    }
    out
}

/// 1D weighted sum along columns (vertical), reflected boundaries.
fn pass_cols(plane: &FramePlane, window: &GaussianWindow) -> FramePlane {
    let (w, h) = (plane.width(), plane.height());
    let hw = window.half_width() as isize;
    let wt = window.weights_1d();
    let mut out = FramePlane::zeros(w, h);
    for r in 0..h {
        let mut rows: Vec<&[f64]> = Vec::with_capacity(wt.len());
        for k in 0..wt.len() {
            rows.push(plane.row(reflect(r as isize + k as isize - hw, h)));
        }
        for c in 0..w {
            let mut acc = 0.0;
            for (k, &wk) in wt.iter().enumerate() {
                acc += wk * rows[k][c];
            }
            out.set(r, c, acc);
        }
    }
    out
}

fn smooth(plane: &FramePlane, window: &GaussianWindow) -> FramePlane {
    // The 2D window factorizes, so two 1D passes equal the full 2D sum.
    pass_cols(&pass_rows(plane, window), window)
}

/// Gaussian-weighted local mean and deviation at every pixel.
pub fn local_moments(
    plane: &FramePlane,
    window: &GaussianWindow,
) -> Result<(FramePlane, FramePlane)> {
    if plane.width() < window.size() || plane.height() < window.size() {
        return Err(Error::TooSmall(format!(
            "{}x{} plane is smaller than the {}x{} window",
            plane.width(),
            plane.height(),
            window.size(),
            window.size()
        )));
    }
    let mu = smooth(plane, window);
    let sq = FramePlane::new(
        plane.width(),
        plane.height(),
        plane.samples().iter().map(|v| v * v).collect(),
    )?;
    let musq = smooth(&sq, window);
    let mut sigma = FramePlane::zeros(plane.width(), plane.height());
    for i in 0..sigma.samples().len() {
        let var = musq.samples()[i] - mu.samples()[i] * mu.samples()[i];
        sigma.samples_mut()[i] = var.max(0.0).sqrt();
    }
    Ok((mu, sigma))
}

/// MSCN coefficients plus the local moments they were built from.
pub fn mscn_with_moments(
    plane: &FramePlane,
    window: &GaussianWindow,
    c: f64,
) -> Result<(FramePlane, FramePlane, FramePlane)> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "normalization constant {c} must be positive"
        )));
    }
    let (mu, sigma) = local_moments(plane, window)?;
    let mut m = FramePlane::zeros(plane.width(), plane.height());
    for i in 0..m.samples().len() {
        m.samples_mut()[i] =
            (plane.samples()[i] - mu.samples()[i]) / (sigma.samples()[i] + c);
    }
    Ok((m, mu, sigma))
}

/// Mean-subtracted contrast-normalized coefficients.
pub fn mscn(plane: &FramePlane, window: &GaussianWindow, c: f64) -> Result<FramePlane> {
    Ok(mscn_with_moments(plane, window, c)?.0)
}

/// Index-shifted neighbor products of a coefficient plane, in the order
/// horizontal, vertical, main diagonal, anti diagonal. Each output
/// shrinks by one row and/or column as its shift requires.
pub fn pairwise_products(m: &FramePlane) -> Result<[FramePlane; 4]> {
    let (w, h) = (m.width(), m.height());
    if w < 2 || h < 2 {
        return Err(Error::TooSmall(format!(
            "pairwise products need at least 2x2, got {h}x{w}"
        )));
    }
    let mut hp = FramePlane::zeros(w - 1, h);
    let mut vp = FramePlane::zeros(w, h - 1);
    let mut d1 = FramePlane::zeros(w - 1, h - 1);
    let mut d2 = FramePlane::zeros(w - 1, h - 1);
    for r in 0..h {
        for c in 0..w - 1 {
            hp.set(r, c, m.get(r, c) * m.get(r, c + 1));
        }
    }
    for r in 0..h - 1 {
        for c in 0..w {
            vp.set(r, c, m.get(r, c) * m.get(r + 1, c));
        }
        for c in 0..w - 1 {
            d1.set(r, c, m.get(r, c) * m.get(r + 1, c + 1));
        }
        for c in 1..w {
            d2.set(r, c - 1, m.get(r, c) * m.get(r + 1, c - 1));
        }
    }
    Ok([hp, vp, d1, d2])
}

/// Population excess kurtosis (fourth central moment over squared
/// variance, minus 3).
pub fn excess_kurtosis(samples: &[f64]) -> Result<f64> {
    if samples.len() < 4 {
        return Err(Error::TooSmall(format!(
            "kurtosis needs at least 4 samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    if m2 <= 0.0 {
        return Err(Error::DegenerateInput("zero variance in kurtosis input".into()));
    }
    Ok(m4 / (m2 * m2) - 3.0)
}

// Shape-ratio table for the generalized Gaussian family:
// rho(alpha) = Gamma(2/alpha)^2 / (Gamma(1/alpha) Gamma(3/alpha)),
// strictly increasing on the tabulated range.
pub(crate) const ALPHA_MIN: f64 = 0.05;
pub(crate) const ALPHA_MAX: f64 = 10.0;
pub(crate) const ALPHA_STEP: f64 = 1e-3;

pub(crate) fn rho(alpha: f64) -> f64 {
    let g2 = gamma(2.0 / alpha);
    g2 * g2 / (gamma(1.0 / alpha) * gamma(3.0 / alpha))
}

static RHO_TABLE: Lazy<Vec<f64>> = Lazy::new(|| {
    let n = ((ALPHA_MAX - ALPHA_MIN) / ALPHA_STEP).round() as usize + 1;
    let table: Vec<f64> = (0..n).map(|i| rho(ALPHA_MIN + i as f64 * ALPHA_STEP)).collect();
    debug_assert!(table.windows(2).all(|w| w[0] < w[1]), "rho must be increasing");
    table
});

/// Invert the shape-ratio function by table lookup with linear
/// interpolation; ratios outside the tabulated range clamp to the ends.
pub(crate) fn invert_rho(ratio: f64) -> f64 {
    let table = &*RHO_TABLE;
    if ratio <= table[0] {
        return ALPHA_MIN;
    }
    if ratio >= *table.last().unwrap() {
        return ALPHA_MAX;
    }
    // First index with table[i] >= ratio; predecessor exists by the
    // clamp above.
    let i = table.partition_point(|&v| v < ratio);
    let (lo, hi) = (table[i - 1], table[i]);
    let frac = (ratio - lo) / (hi - lo);
    ALPHA_MIN + (i as f64 - 1.0 + frac) * ALPHA_STEP
}

/// Zero-mean generalized Gaussian fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgdFit {
    /// Shape: 2 is Gaussian, 1 is Laplacian.
    pub alpha: f64,
    /// Scale, tied to alpha and sigma2.
    pub beta: f64,
    /// Second moment about zero.
    pub sigma2: f64,
}

/// Moment-matching GGD estimator over the sample's second and absolute
/// first moments about zero.
pub fn fit_ggd(samples: &[f64]) -> Result<GgdFit> {
    if samples.len() < 16 {
        return Err(Error::TooSmall(format!(
            "GGD fit needs at least 16 samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mut e_abs = 0.0;
    let mut e_sq = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &x in samples {
        e_abs += x.abs();
        e_sq += x * x;
        min = min.min(x);
        max = max.max(x);
    }
    if !(min.is_finite() && max.is_finite()) {
        return Err(Error::NonFinite("GGD fit input".into()));
    }
    if min == max {
        return Err(Error::DegenerateInput("GGD fit on constant samples".into()));
    }
    e_abs /= n;
    e_sq /= n;
    if e_sq <= 0.0 {
        return Err(Error::DegenerateInput("GGD fit on all-zero samples".into()));
    }
    let alpha = invert_rho(e_abs * e_abs / e_sq);
    let beta = (e_sq * gamma(1.0 / alpha) / gamma(3.0 / alpha)).sqrt();
    Ok(GgdFit {
        alpha,
        beta,
        sigma2: e_sq,
    })
}

/// Zero-mode asymmetric generalized Gaussian fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggdFit {
    /// Shared shape of both sides.
    pub nu: f64,
    /// Mean offset implied by the asymmetry.
    pub eta: f64,
    /// Conditional second moments per side.
    pub sigma_l2: f64,
    pub sigma_r2: f64,
    /// Per-side scales.
    pub beta_l: f64,
    pub beta_r: f64,
}

/// Moment-matching AGGD estimator: per-side second moments plus the
/// asymmetry-corrected generalized ratio, inverted on the shared shape
/// table.
pub fn fit_aggd(samples: &[f64]) -> Result<AggdFit> {
    if samples.len() < 16 {
        return Err(Error::TooSmall(format!(
            "AGGD fit needs at least 16 samples, got {}",
            samples.len()
        )));
    }
    let mut n_l = 0usize;
    let mut n_r = 0usize;
    let mut sum_l2 = 0.0;
    let mut sum_r2 = 0.0;
    let mut e_abs = 0.0;
    let mut e_sq = 0.0;
    for &x in samples {
        if !x.is_finite() {
            return Err(Error::NonFinite("AGGD fit input".into()));
        }
        if x < 0.0 {
            n_l += 1;
            sum_l2 += x * x;
        } else if x > 0.0 {
            n_r += 1;
            sum_r2 += x * x;
        }
        e_abs += x.abs();
        e_sq += x * x;
    }
    if n_l == 0 || n_r == 0 {
        return Err(Error::DegenerateInput(
            "AGGD fit needs samples on both sides of zero".into(),
        ));
    }
    let n = samples.len() as f64;
    e_abs /= n;
    e_sq /= n;
    let sigma_l2 = sum_l2 / n_l as f64;
    let sigma_r2 = sum_r2 / n_r as f64;
    let gamma_hat = (sigma_l2 / sigma_r2).sqrt();
    let r_hat = e_abs * e_abs / e_sq;
    let correction = (gamma_hat.powi(3) + 1.0) * (gamma_hat + 1.0)
        / (gamma_hat * gamma_hat + 1.0).powi(2);
    let nu = invert_rho(r_hat * correction);
    let scale = (gamma(1.0 / nu) / gamma(3.0 / nu)).sqrt();
    let beta_l = sigma_l2.sqrt() * scale;
    let beta_r = sigma_r2.sqrt() * scale;
    let eta = (beta_r - beta_l) * gamma(2.0 / nu) / gamma(1.0 / nu);
    Ok(AggdFit {
        nu,
        eta,
        sigma_l2,
        sigma_r2,
        beta_l,
        beta_r,
    })
}

/// Number of statistics shared by the per-patch/per-plane feature sets:
/// GGD shape and second moment of the coefficients, plus (eta, nu,
/// sigma_l2, sigma_r2) for each of the four neighbor-product planes.
pub const NSS_FEATURES: usize = 18;

/// The 18 shared statistics of one coefficient plane.
pub fn nss_features(m: &FramePlane) -> Result<[f64; NSS_FEATURES]> {
    let ggd = fit_ggd(m.samples())?;
    let products = pairwise_products(m)?;
    let mut out = [0.0; NSS_FEATURES];
    out[0] = ggd.alpha;
    out[1] = ggd.sigma2;
    for (k, plane) in products.iter().enumerate() {
        let fit = fit_aggd(plane.samples())?;
        out[2 + 4 * k] = fit.eta;
        out[3 + 4 * k] = fit.nu;
        out[4 + 4 * k] = fit.sigma_l2;
        out[5 + 4 * k] = fit.sigma_r2;
    }
    Ok(out)
}

/// Synthetic draws from the fitted families, for estimator calibration
/// and tests.
pub mod sampling {
    use rand::Rng;
    use rand_distr::{Distribution, Gamma as GammaDist};

    /// Draw from a zero-mean GGD via gamma-distributed magnitudes:
    /// |x| = beta * G^(1/alpha) with G ~ Gamma(1/alpha, 1).
    pub fn sample_ggd(rng: &mut impl Rng, alpha: f64, beta: f64, n: usize) -> Vec<f64> {
        let g = GammaDist::new(1.0 / alpha, 1.0).unwrap();
        (0..n)
            .map(|_| {
                let mag = beta * g.sample(rng).powf(1.0 / alpha);
                if rng.gen_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            })
            .collect()
    }

    /// Draw from an AGGD by choosing a side with probability proportional
    /// to its scale, then drawing a one-sided GGD magnitude.
    pub fn sample_aggd(
        rng: &mut impl Rng,
        nu: f64,
        beta_l: f64,
        beta_r: f64,
        n: usize,
    ) -> Vec<f64> {
        let g = GammaDist::new(1.0 / nu, 1.0).unwrap();
        let p_left = beta_l / (beta_l + beta_r);
        (0..n)
            .map(|_| {
                let mag = g.sample(rng).powf(1.0 / nu);
                if rng.gen_bool(p_left) {
                    -beta_l * mag
                } else {
                    beta_r * mag
                }
            })
            .collect()
    }

    /// beta for a GGD with unit second moment at the given shape.
    pub fn unit_variance_beta(alpha: f64) -> f64 {
        use statrs::function::gamma::gamma;
        (gamma(1.0 / alpha) / gamma(3.0 / alpha)).sqrt()
    }

    /// Second moment of a (one- or two-sided) GGD with scale `beta`.
    pub fn ggd_second_moment(alpha: f64, beta: f64) -> f64 {
        use statrs::function::gamma::gamma;
        beta * beta * gamma(3.0 / alpha) / gamma(1.0 / alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> FramePlane {
        use rand::Rng;
        FramePlane::from_fn(w, h, |_, _| rng.gen_range(0.0..1.0))
    }

    #[test]
    fn standard_window_has_49_unit_sum_weights() {
        let win = GaussianWindow::standard();
        let w2 = win.weights_2d();
        assert_eq!(w2.len(), 49);
        let sum: f64 = w2.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        // Symmetry and a strict peak at the center.
        for i in 0..7 {
            assert!((win.weights_1d()[i] - win.weights_1d()[6 - i]).abs() < 1e-15);
        }
        assert!(win.weights_1d()[3] > win.weights_1d()[2]);
    }

    /// Direct 2D windowed sum with reflected boundaries, for oracle use.
    fn windowed_sum(plane: &FramePlane, win: &GaussianWindow, r: usize, c: usize, f: impl Fn(f64) -> f64) -> f64 {
        let hw = win.half_width() as isize;
        let w2 = win.weights_2d();
        let k = win.size();
        let mut acc = 0.0;
        for a in 0..k {
            for b in 0..k {
                let rr = reflect(r as isize + a as isize - hw, plane.height());
                let cc = reflect(c as isize + b as isize - hw, plane.width());
                acc += w2[a * k + b] * f(plane.get(rr, cc));
            }
        }
        acc
    }

    #[test]
    fn moments_match_double_loop_identity() {
        // sigma^2 + mu^2 must equal the windowed mean of squares.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let plane = random_plane(&mut rng, 16, 12);
        let win = GaussianWindow::standard();
        let (mu, sigma) = local_moments(&plane, &win).unwrap();
        for (r, c) in [(0, 0), (5, 7), (11, 15), (3, 0), (0, 9), (11, 0)] {
            let mean_sq = windowed_sum(&plane, &win, r, c, |v| v * v);
            let lhs = sigma.get(r, c).powi(2) + mu.get(r, c).powi(2);
            assert!((lhs - mean_sq).abs() < 1e-10, "({r},{c}): {lhs} vs {mean_sq}");
            let mean = windowed_sum(&plane, &win, r, c, |v| v);
            assert!((mu.get(r, c) - mean).abs() < 1e-10);
        }
    }

    #[test]
    fn mscn_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let plane = random_plane(&mut rng, 13, 9);
        let win = GaussianWindow::standard();
        let m = mscn(&plane, &win, DEFAULT_C).unwrap();
        for r in 0..9 {
            for c in 0..13 {
                let mu = windowed_sum(&plane, &win, r, c, |v| v);
                let var = windowed_sum(&plane, &win, r, c, |v| v * v) - mu * mu;
                let sigma = var.max(0.0).sqrt();
                let expect = (plane.get(r, c) - mu) / (sigma + DEFAULT_C);
                assert!((m.get(r, c) - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mscn_of_constant_plane_is_zero() {
        let plane = FramePlane::from_fn(10, 8, |_, _| 0.37);
        let m = mscn(&plane, &GaussianWindow::standard(), DEFAULT_C).unwrap();
        for &v in m.samples() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn mscn_rejects_undersized_plane() {
        let plane = FramePlane::zeros(6, 10);
        assert!(mscn(&plane, &GaussianWindow::standard(), DEFAULT_C).is_err());
    }

    #[test]
    fn pairwise_products_on_2x2() {
        let m = FramePlane::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let [h, v, d1, d2] = pairwise_products(&m).unwrap();
        assert_eq!(h.samples(), &[2.0, 12.0]);
        assert_eq!(v.samples(), &[3.0, 8.0]);
        assert_eq!(d1.samples(), &[4.0]);
        assert_eq!(d2.samples(), &[6.0]);
    }

    #[test]
    fn kurtosis_of_known_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        use rand_distr::{Distribution, Normal};
        let normal = Normal::new(0.0, 1.0).unwrap();
        let gauss: Vec<f64> = (0..1_000_000).map(|_| normal.sample(&mut rng)).collect();
        assert!(excess_kurtosis(&gauss).unwrap().abs() < 0.05);

        // Uniform has excess kurtosis -1.2 exactly.
        use rand::Rng;
        let unif: Vec<f64> = (0..1_000_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        assert!((excess_kurtosis(&unif).unwrap() + 1.2).abs() < 0.02);

        assert!(excess_kurtosis(&[5.0; 100]).is_err());
        assert!(excess_kurtosis(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn rho_table_inverts_its_own_forward_map() {
        for alpha in [0.1, 0.5, 1.0, 2.0, 3.3, 7.7] {
            let back = invert_rho(rho(alpha));
            assert!((back - alpha).abs() < 2e-3, "{alpha} -> {back}");
        }
        // Out-of-range ratios clamp.
        assert_eq!(invert_rho(0.0), ALPHA_MIN);
        assert_eq!(invert_rho(1.0), ALPHA_MAX);
    }

    #[test]
    fn ggd_fit_recovers_gaussian_and_laplacian() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        use rand_distr::{Distribution, Normal};
        let normal = Normal::new(0.0, 1.0).unwrap();
        let gauss: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut rng)).collect();
        let fit = fit_ggd(&gauss).unwrap();
        assert!((fit.alpha - 2.0).abs() < 0.1, "alpha {}", fit.alpha);
        assert!((fit.sigma2 - 1.0).abs() < 0.05);

        // Laplace(b) is the alpha = 1 member with beta = b.
        use rand::Rng;
        let b = 0.8;
        let laplace: Vec<f64> = (0..100_000)
            .map(|_| {
                let u: f64 = rng.gen_range(-0.5..0.5);
                -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            })
            .collect();
        let fit = fit_ggd(&laplace).unwrap();
        assert!((fit.alpha - 1.0).abs() < 0.05, "alpha {}", fit.alpha);
        assert!((fit.beta - b).abs() < 0.05, "beta {}", fit.beta);
    }

    #[test]
    fn ggd_fit_beta_consistent_with_alpha_and_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples = sampling::sample_ggd(&mut rng, 1.5, 1.0, 50_000);
        let fit = fit_ggd(&samples).unwrap();
        let expect_beta = (fit.sigma2 * gamma(1.0 / fit.alpha) / gamma(3.0 / fit.alpha)).sqrt();
        assert!((fit.beta - expect_beta).abs() < 1e-12);
    }

    #[test]
    fn ggd_fit_degenerate_inputs() {
        assert!(matches!(
            fit_ggd(&[0.5; 64]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(fit_ggd(&[1.0; 8]), Err(Error::TooSmall(_))));
    }

    #[test]
    fn aggd_fit_recovers_asymmetric_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // nu = 1, conditional sigmas 1 and 2.
        let beta_l = 1.0 / 2.0f64.sqrt();
        let beta_r = 2.0 / 2.0f64.sqrt();
        let samples = sampling::sample_aggd(&mut rng, 1.0, beta_l, beta_r, 1_000_000);
        let fit = fit_aggd(&samples).unwrap();
        assert!((fit.nu - 1.0).abs() < 0.1, "nu {}", fit.nu);
        assert!((fit.sigma_l2.sqrt() - 1.0).abs() < 0.1, "sigma_l {}", fit.sigma_l2.sqrt());
        assert!((fit.sigma_r2.sqrt() - 2.0).abs() < 0.2, "sigma_r {}", fit.sigma_r2.sqrt());
        // Right-heavy distribution pulls the mean offset positive.
        assert!(fit.eta > 0.0);
    }

    #[test]
    fn aggd_fit_on_symmetric_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        use rand_distr::{Distribution, Normal};
        let normal = Normal::new(0.0, 1.0).unwrap();
        let samples: Vec<f64> = (0..200_000).map(|_| normal.sample(&mut rng)).collect();
        let fit = fit_aggd(&samples).unwrap();
        assert!((fit.nu - 2.0).abs() < 0.1);
        assert!(fit.eta.abs() < 0.02);
        assert!((fit.sigma_l2 - 1.0).abs() < 0.05);
        assert!((fit.sigma_r2 - 1.0).abs() < 0.05);
    }

    #[test]
    fn aggd_fit_rejects_one_sided_samples() {
        let pos: Vec<f64> = (1..100).map(|i| i as f64).collect();
        assert!(matches!(fit_aggd(&pos), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn nss_features_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let plane = random_plane(&mut rng, 32, 32);
        let m = mscn(&plane, &GaussianWindow::standard(), DEFAULT_C).unwrap();
        let f = nss_features(&m).unwrap();
        let ggd = fit_ggd(m.samples()).unwrap();
        assert_eq!(f[0], ggd.alpha);
        assert_eq!(f[1], ggd.sigma2);
        let [h, _, _, _] = pairwise_products(&m).unwrap();
        let fit_h = fit_aggd(h.samples()).unwrap();
        assert_eq!(f[2], fit_h.eta);
        assert_eq!(f[3], fit_h.nu);
        assert_eq!(f[4], fit_h.sigma_l2);
        assert_eq!(f[5], fit_h.sigma_r2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // Pairwise products against index arithmetic on arbitrary planes.
        #[test]
        fn products_match_shifts(seed in 0u64..500, w in 2usize..9, h in 2usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_plane(&mut rng, w, h);
            let [hp, vp, d1, d2] = pairwise_products(&m).unwrap();
            prop_assert_eq!((hp.width(), hp.height()), (w - 1, h));
            prop_assert_eq!((vp.width(), vp.height()), (w, h - 1));
            prop_assert_eq!((d1.width(), d1.height()), (w - 1, h - 1));
            prop_assert_eq!((d2.width(), d2.height()), (w - 1, h - 1));
            for r in 0..h - 1 {
                for c in 0..w - 1 {
                    prop_assert_eq!(d1.get(r, c), m.get(r, c) * m.get(r + 1, c + 1));
                    prop_assert_eq!(d2.get(r, c), m.get(r, c + 1) * m.get(r + 1, c));
                }
            }
        }

        // MSCN coefficients stay finite and the denominator keeps them
        // bounded by the local excursion over C.
        #[test]
        fn mscn_is_finite(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let plane = random_plane(&mut rng, 9, 9);
            let m = mscn(&plane, &GaussianWindow::standard(), DEFAULT_C).unwrap();
            for &v in m.samples() {
                prop_assert!(v.is_finite());
                prop_assert!(v.abs() <= 1.0 / DEFAULT_C);
            }
        }
    }
}
