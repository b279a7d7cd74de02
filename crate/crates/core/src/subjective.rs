//! Subjective-score recovery: maximum-likelihood MOS under a
//! subject-bias-and-inconsistency model, DMOS against per-content
//! references, split-half internal consistency, and logistic merge maps
//! between score scales.
//!
//! The observation model is u_ij ~ N(Psi_j + Delta_i, nu_i^2) for item
//! j (a video on a device) and subject i. The solver alternates exact
//! coordinate updates (Psi: precision-weighted mean; Delta: residual
//! mean, recentred to sum zero; nu^2: residual variance, floored), so
//! the log-likelihood never decreases.

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{median, plcc, sample_std};
use crate::optim::{nelder_mead, SimplexOptions};

/// Variance floor keeping zero-residual subjects off the likelihood's
/// singular boundary.
pub const NU2_FLOOR: f64 = 1e-4;
const MAX_SWEEPS: usize = 1000;
const LL_TOL: f64 = 1e-9;

/// One raw rating row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScore {
    #[serde(rename = "subject_id")]
    pub subject: String,
    #[serde(rename = "video_id")]
    pub video: String,
    #[serde(rename = "device_id")]
    pub device: String,
    pub score: f64,
}

/// Read raw scores from CSV with header subject_id,video_id,device_id,score.
pub fn read_scores_csv(path: &Path) -> Result<Vec<RawScore>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let score: RawScore = row.map_err(|e| Error::parse(path, e.to_string()))?;
        if !score.score.is_finite() {
            return Err(Error::parse(path, format!("non-finite score for {}", score.video)));
        }
        out.push(score);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MosSolution {
    /// Recovered quality per (video, device) item.
    pub psi: BTreeMap<(String, String), f64>,
    /// Per-subject additive bias; sums to zero.
    pub delta: BTreeMap<String, f64>,
    /// Per-subject inconsistency (standard deviation).
    pub nu: BTreeMap<String, f64>,
    pub log_likelihood: f64,
    pub sweeps: usize,
    /// Log-likelihood after each sweep; non-decreasing by construction.
    pub ll_trace: Vec<f64>,
    /// Subjects whose variance update hit the floor.
    pub floored_subjects: Vec<String>,
}

/// Maximum-likelihood MOS by alternating exact coordinate updates.
pub fn solve_mos(scores: &[RawScore]) -> Result<MosSolution> {
    // Index items and subjects in sorted order for determinism.
    let mut item_ids: Vec<(String, String)> = scores
        .iter()
        .map(|s| (s.video.clone(), s.device.clone()))
        .collect();
    item_ids.sort();
    item_ids.dedup();
    let mut subject_ids: Vec<String> = scores.iter().map(|s| s.subject.clone()).collect();
    subject_ids.sort();
    subject_ids.dedup();
    let item_of: BTreeMap<&(String, String), usize> =
        item_ids.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let subject_of: BTreeMap<&str, usize> = subject_ids
        .iter()
        .enumerate()
        .map(|(i, k)| (k.as_str(), i))
        .collect();

    let obs: Vec<(usize, usize, f64)> = scores
        .iter()
        .map(|s| {
            (
                subject_of[s.subject.as_str()],
                item_of[&(s.video.clone(), s.device.clone())],
                s.score,
            )
        })
        .collect();
    if obs.iter().any(|&(_, _, u)| !u.is_finite()) {
        return Err(Error::NonFinite("scores contain non-finite values".into()));
    }
    let n_items = item_ids.len();
    let n_subjects = subject_ids.len();
    let mut per_item = vec![0usize; n_items];
    let mut per_subject = vec![0usize; n_subjects];
    for &(i, j, _) in &obs {
        per_subject[i] += 1;
        per_item[j] += 1;
    }
    if let Some(j) = per_item.iter().position(|&n| n < 2) {
        return Err(Error::Invalid(format!(
            "item {:?} has {} ratings, need at least 2",
            item_ids[j], per_item[j]
        )));
    }
    if let Some(i) = per_subject.iter().position(|&n| n < 2) {
        return Err(Error::Invalid(format!(
            "subject {:?} has {} ratings, need at least 2",
            subject_ids[i], per_subject[i]
        )));
    }

    // Init: Psi = item means, Delta = 0, nu^2 = 1.
    let mut psi = vec![0.0; n_items];
    for &(_, j, u) in &obs {
        psi[j] += u;
    }
    for (p, &n) in psi.iter_mut().zip(&per_item) {
        *p /= n as f64;
    }
    let mut delta = vec![0.0; n_subjects];
    let mut nu2 = vec![1.0; n_subjects];
    let mut floored = vec![false; n_subjects];

    let log_likelihood = |psi: &[f64], delta: &[f64], nu2: &[f64]| -> f64 {
        obs.iter()
            .map(|&(i, j, u)| {
                let r = u - psi[j] - delta[i];
                -0.5 * (2.0 * std::f64::consts::PI * nu2[i]).ln() - r * r / (2.0 * nu2[i])
            })
            .sum()
    };

    let mut ll = f64::NEG_INFINITY;
    let mut ll_trace = Vec::new();
    let mut sweeps = 0;
    for sweep in 1..=MAX_SWEEPS {
        sweeps = sweep;
        // Psi: precision-weighted means of bias-corrected scores.
        let mut num = vec![0.0; n_items];
        let mut den = vec![0.0; n_items];
        for &(i, j, u) in &obs {
            let w = 1.0 / nu2[i];
            num[j] += w * (u - delta[i]);
            den[j] += w;
        }
        for j in 0..n_items {
            psi[j] = num[j] / den[j];
        }
        // Delta: per-subject mean residual, then recentred to sum zero
        // (the model only identifies Psi + Delta up to a shared shift).
        let mut dsum = vec![0.0; n_subjects];
        for &(i, j, u) in &obs {
            dsum[i] += u - psi[j];
        }
        for i in 0..n_subjects {
            delta[i] = dsum[i] / per_subject[i] as f64;
        }
        let shift = delta.iter().sum::<f64>() / n_subjects as f64;
        for d in &mut delta {
            *d -= shift;
        }
        for p in &mut psi {
            *p += shift;
        }
        // nu^2: per-subject residual variance, floored.
        let mut rss = vec![0.0; n_subjects];
        for &(i, j, u) in &obs {
            let r = u - psi[j] - delta[i];
            rss[i] += r * r;
        }
        for i in 0..n_subjects {
            let v = rss[i] / per_subject[i] as f64;
            if v < NU2_FLOOR {
                nu2[i] = NU2_FLOOR;
                floored[i] = true;
            } else {
                nu2[i] = v;
            }
        }
        let next = log_likelihood(&psi, &delta, &nu2);
        assert!(
            next + 1e-6 * (1.0 + next.abs()) >= ll,
            "likelihood regressed: {ll} -> {next}"
        );
        ll_trace.push(next);
        if next - ll < LL_TOL {
            ll = next;
            break;
        }
        ll = next;
    }

    let floored_subjects: Vec<String> = subject_ids
        .iter()
        .zip(&floored)
        .filter(|(_, &f)| f)
        .map(|(s, _)| s.clone())
        .collect();
    for s in &floored_subjects {
        warn!("subject {s:?} has near-zero residual variance; floored");
    }
    Ok(MosSolution {
        psi: item_ids.iter().cloned().zip(psi).collect(),
        delta: subject_ids.iter().cloned().zip(delta).collect(),
        nu: subject_ids
            .iter()
            .cloned()
            .zip(nu2.iter().map(|v| v.sqrt()))
            .collect(),
        log_likelihood: ll,
        sweeps,
        ll_trace,
        floored_subjects,
    })
}

/// Difference scores: DMOS of a video on a device is its Psi minus the
/// Psi of its content's reference video on the same device.
pub fn dmos(
    solution: &MosSolution,
    reference_of: &BTreeMap<String, String>,
) -> Result<BTreeMap<(String, String), f64>> {
    let mut out = BTreeMap::new();
    for ((video, device), &psi) in &solution.psi {
        let Some(reference) = reference_of.get(video) else {
            return Err(Error::MissingReference(format!(
                "video {video:?} has no reference mapping"
            )));
        };
        let key = (reference.clone(), device.clone());
        let Some(&psi_ref) = solution.psi.get(&key) else {
            return Err(Error::MissingReference(format!(
                "reference {reference:?} was not rated on device {device:?}"
            )));
        };
        out.insert((video.clone(), device.clone()), psi - psi_ref);
    }
    Ok(out)
}

/// Split-half consistency per device: subjects are z-scored, randomly
/// halved, per-video half means correlated, and the median Pearson r
/// over trials reported. Zero-variance subjects are excluded.
pub fn internal_correlation(
    scores: &[RawScore],
    n_trials: usize,
    seed: u64,
) -> Result<BTreeMap<String, f64>> {
    if n_trials == 0 {
        return Err(Error::InvalidConfig("no trials requested".into()));
    }
    let mut devices: Vec<&str> = scores.iter().map(|s| s.device.as_str()).collect();
    devices.sort_unstable();
    devices.dedup();

    let mut out = BTreeMap::new();
    for device in devices {
        let rows: Vec<&RawScore> = scores.iter().filter(|s| s.device == device).collect();
        let mut subjects: Vec<&str> = rows.iter().map(|s| s.subject.as_str()).collect();
        subjects.sort_unstable();
        subjects.dedup();
        if subjects.len() < 4 {
            return Err(Error::Invalid(format!(
                "device {device:?} has {} subjects, need at least 4",
                subjects.len()
            )));
        }
        // Per-subject z-scores over that subject's ratings on this device.
        let mut z_of: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
        let mut usable: Vec<&str> = Vec::new();
        for &subject in &subjects {
            let theirs: Vec<&&RawScore> = rows.iter().filter(|s| s.subject == subject).collect();
            let n = theirs.len() as f64;
            let mean = theirs.iter().map(|s| s.score).sum::<f64>() / n;
            let var = theirs
                .iter()
                .map(|s| (s.score - mean) * (s.score - mean))
                .sum::<f64>()
                / n;
            if var == 0.0 {
                warn!("subject {subject:?} on {device:?} has constant scores; excluded");
                continue;
            }
            let std = var.sqrt();
            z_of.insert(
                subject,
                theirs
                    .iter()
                    .map(|s| (s.video.as_str(), (s.score - mean) / std))
                    .collect(),
            );
            usable.push(subject);
        }
        if usable.len() < 4 {
            return Err(Error::Invalid(format!(
                "device {device:?} has {} subjects with usable variance, need at least 4",
                usable.len()
            )));
        }

        let mut videos: Vec<&str> = rows.iter().map(|s| s.video.as_str()).collect();
        videos.sort_unstable();
        videos.dedup();

        let half_mean = |half: &[&str], video: &str| -> Option<f64> {
            let vals: Vec<f64> = half
                .iter()
                .filter_map(|s| z_of[s].get(video).copied())
                .collect();
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };

        let mut trial_rs = Vec::with_capacity(n_trials);
        for trial in 0..n_trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + trial as u64);
            let mut shuffled = usable.clone();
            shuffled.shuffle(&mut rng);
            let (a, b) = shuffled.split_at(shuffled.len() / 2);
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for &video in &videos {
                if let (Some(x), Some(y)) = (half_mean(a, video), half_mean(b, video)) {
                    xs.push(x);
                    ys.push(y);
                }
            }
            match plcc(&xs, &ys) {
                Ok(r) => trial_rs.push(r),
                Err(e) => warn!("device {device:?} trial {trial}: {e}"),
            }
        }
        if trial_rs.is_empty() {
            return Err(Error::DegenerateInput(format!(
                "device {device:?}: no trial produced a defined correlation"
            )));
        }
        out.insert(device.to_string(), median(&trial_rs));
    }
    Ok(out)
}

/// Logistic map between two score scales, fitted on anchor pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub s: f64,
    /// Residual RMSE on the anchor pairs.
    pub rmse: f64,
}

impl MergeMap {
    /// f(x) = (a - b) / (1 + exp(-(x - c) / s)) + b.
    pub fn apply(&self, x: f64) -> f64 {
        (self.a - self.b) / (1.0 + (-(x - self.c) / self.s).exp()) + self.b
    }
}

/// Least-squares logistic fit from anchor source scores to destination
/// scores.
pub fn fit_merge_map(src: &[f64], dst: &[f64]) -> Result<MergeMap> {
    if src.len() != dst.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} source vs {} destination anchors",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 6 {
        return Err(Error::TooSmall(format!(
            "merge map needs at least 6 anchor pairs, got {}",
            src.len()
        )));
    }
    let n = src.len() as f64;
    let dst_hi = dst.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dst_lo = dst.iter().cloned().fold(f64::INFINITY, f64::min);
    if dst_hi == dst_lo {
        return Err(Error::DegenerateInput(
            "constant destination scores give a degenerate map (a = b)".into(),
        ));
    }
    let src_mean = src.iter().sum::<f64>() / n;
    let src_std = sample_std(src);
    if src_std == 0.0 {
        return Err(Error::DegenerateInput("constant source scores".into()));
    }
    let x0 = vec![dst_hi, dst_lo, src_mean, src_std / 4.0];
    let sse = |p: &[f64]| -> f64 {
        let m = MergeMap {
            a: p[0],
            b: p[1],
            c: p[2],
            s: p[3],
            rmse: 0.0,
        };
        src.iter()
            .zip(dst)
            .map(|(&x, &y)| {
                let e = m.apply(x) - y;
                e * e
            })
            .sum()
    };
    let opts = SimplexOptions {
        max_iters: 5000,
        rel_tol: 1e-9,
    };
    let result = nelder_mead(&sse, &x0, &opts);
    let map = MergeMap {
        a: result.x[0],
        b: result.x[1],
        c: result.x[2],
        s: result.x[3],
        rmse: (result.value / n).sqrt(),
    };
    if !result.converged {
        return Err(Error::NoConvergence(format!(
            "merge map stalled after {} iterations; best a={:.4} b={:.4} c={:.4} s={:.4} rmse={:.4}",
            result.iterations, map.a, map.b, map.c, map.s, map.rmse
        )));
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::rmse;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn score(subject: &str, video: &str, device: &str, value: f64) -> RawScore {
        RawScore {
            subject: subject.into(),
            video: video.into(),
            device: device.into(),
            score: value,
        }
    }

    #[test]
    fn unanimous_subjects_recover_scores_exactly() {
        let truth = [30.0, 55.0, 80.0];
        let mut scores = Vec::new();
        for s in 0..3 {
            for (v, &t) in truth.iter().enumerate() {
                scores.push(score(&format!("s{s}"), &format!("v{v}"), "tv1", t));
            }
        }
        let sol = solve_mos(&scores).unwrap();
        for (v, &t) in truth.iter().enumerate() {
            let key = (format!("v{v}"), "tv1".to_string());
            assert!((sol.psi[&key] - t).abs() < 1e-12);
        }
        for d in sol.delta.values() {
            assert!(d.abs() < 1e-12);
        }
        for nu in sol.nu.values() {
            assert!((nu - NU2_FLOOR.sqrt()).abs() < 1e-12);
        }
        assert_eq!(sol.floored_subjects.len(), 3);
    }

    #[test]
    fn planted_parameters_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let n_videos = 50;
        let n_subjects = 20;
        let psi: Vec<f64> = (0..n_videos).map(|_| rng.gen_range(0.0..100.0)).collect();
        let bias = Normal::new(0.0, 5.0).unwrap();
        let mut delta: Vec<f64> = (0..n_subjects).map(|_| bias.sample(&mut rng)).collect();
        let shift = delta.iter().sum::<f64>() / n_subjects as f64;
        for d in &mut delta {
            *d -= shift;
        }
        let nu: Vec<f64> = (0..n_subjects).map(|_| rng.gen_range(1.0..5.0)).collect();
        let mut scores = Vec::new();
        for i in 0..n_subjects {
            let noise = Normal::new(0.0, nu[i]).unwrap();
            for (j, &p) in psi.iter().enumerate() {
                scores.push(score(
                    &format!("s{i:02}"),
                    &format!("v{j:02}"),
                    "tv1",
                    p + delta[i] + noise.sample(&mut rng),
                ));
            }
        }
        let sol = solve_mos(&scores).unwrap();
        let recovered: Vec<f64> = (0..n_videos)
            .map(|j| sol.psi[&(format!("v{j:02}"), "tv1".to_string())])
            .collect();
        assert!(plcc(&recovered, &psi).unwrap() > 0.99);
        let d_rec: Vec<f64> = (0..n_subjects)
            .map(|i| sol.delta[&format!("s{i:02}")])
            .collect();
        assert!(rmse(&d_rec, &delta).unwrap() < 1.0);
        let sum: f64 = sol.delta.values().sum();
        assert!(sum.abs() < 1e-9);
    }

    #[test]
    fn row_order_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut scores = Vec::new();
        for i in 0..6 {
            for j in 0..8 {
                scores.push(score(
                    &format!("s{i}"),
                    &format!("v{j}"),
                    "tv1",
                    rng.gen_range(1.0..100.0),
                ));
            }
        }
        let a = solve_mos(&scores).unwrap();
        scores.reverse();
        let b = solve_mos(&scores).unwrap();
        for (k, v) in &a.psi {
            assert!((v - b.psi[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn sparse_tables_are_rejected() {
        let scores = vec![
            score("s0", "v0", "tv1", 50.0),
            score("s0", "v1", "tv1", 60.0),
            score("s1", "v1", "tv1", 55.0),
        ];
        // v0 has one rating.
        assert!(matches!(solve_mos(&scores), Err(Error::Invalid(_))));
    }

    #[test]
    fn dmos_subtracts_the_reference() {
        let mut scores = Vec::new();
        for s in 0..3 {
            for (v, val) in [("ref", 80.0), ("dist", 60.0)] {
                scores.push(score(&format!("s{s}"), v, "tv1", val));
            }
        }
        let sol = solve_mos(&scores).unwrap();
        let refs: BTreeMap<String, String> = [
            ("ref".to_string(), "ref".to_string()),
            ("dist".to_string(), "ref".to_string()),
        ]
        .into();
        let d = dmos(&sol, &refs).unwrap();
        assert!((d[&("dist".to_string(), "tv1".to_string())] + 20.0).abs() < 1e-9);
        assert_eq!(d[&("ref".to_string(), "tv1".to_string())], 0.0);
        let missing: BTreeMap<String, String> =
            [("dist".to_string(), "ref".to_string())].into();
        assert!(matches!(
            dmos(&sol, &missing),
            Err(Error::MissingReference(_))
        ));
    }

    #[test]
    fn duplicated_groups_correlate_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base: Vec<f64> = (0..12).map(|_| rng.gen_range(1.0..100.0)).collect();
        let mut scores = Vec::new();
        for s in 0..6 {
            for (v, &val) in base.iter().enumerate() {
                // Every subject scores identically: any split gives r = 1.
                scores.push(score(&format!("s{s}"), &format!("v{v:02}"), "tv1", val));
            }
        }
        let r = internal_correlation(&scores, 10, 1).unwrap();
        assert!((r["tv1"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_scores_correlate_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut scores = Vec::new();
        for s in 0..8 {
            for v in 0..200 {
                scores.push(score(
                    &format!("s{s}"),
                    &format!("v{v:03}"),
                    "tv1",
                    rng.gen_range(1.0..100.0),
                ));
            }
        }
        let r = internal_correlation(&scores, 50, 2).unwrap();
        assert!(r["tv1"].abs() < 0.2, "{}", r["tv1"]);
    }

    #[test]
    fn constant_subject_is_excluded_not_fatal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let base: Vec<f64> = (0..10).map(|_| rng.gen_range(1.0..100.0)).collect();
        let mut scores = Vec::new();
        for s in 0..5 {
            for (v, &val) in base.iter().enumerate() {
                let value = if s == 4 { 50.0 } else { val };
                scores.push(score(&format!("s{s}"), &format!("v{v:02}"), "tv1", value));
            }
        }
        let r = internal_correlation(&scores, 10, 3).unwrap();
        assert!((r["tv1"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_subjects_is_an_error() {
        let mut scores = Vec::new();
        for s in 0..3 {
            for v in 0..5 {
                scores.push(score(&format!("s{s}"), &format!("v{v}"), "tv1", v as f64));
            }
        }
        assert!(matches!(
            internal_correlation(&scores, 5, 0),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn self_map_is_near_identity() {
        let src: Vec<f64> = (0..16).map(|i| 10.0 + 5.0 * i as f64).collect();
        let map = fit_merge_map(&src, &src).unwrap();
        assert!(map.rmse < 0.5, "{}", map.rmse);
        for &x in &src {
            assert!((map.apply(x) - x).abs() < 1.0);
        }
    }

    #[test]
    fn known_logistic_is_recovered() {
        let truth = MergeMap {
            a: 90.0,
            b: 10.0,
            c: 50.0,
            s: 10.0,
            rmse: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let src: Vec<f64> = (0..20).map(|i| 5.0 * i as f64).collect();
        let dst: Vec<f64> = src
            .iter()
            .map(|&x| truth.apply(x) + noise.sample(&mut rng))
            .collect();
        let map = fit_merge_map(&src, &dst).unwrap();
        let pred: Vec<f64> = src.iter().map(|&x| map.apply(x)).collect();
        let gen: Vec<f64> = src.iter().map(|&x| truth.apply(x)).collect();
        assert!(rmse(&pred, &gen).unwrap() < 1.0);
    }

    #[test]
    fn merge_map_is_monotone_on_comonotone_anchors() {
        let src: Vec<f64> = (0..12).map(|i| i as f64 * 8.0).collect();
        let dst: Vec<f64> = src.iter().map(|&x| 20.0 + 0.7 * x).collect();
        let map = fit_merge_map(&src, &dst).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=100 {
            let x = src[0] + (src[11] - src[0]) * k as f64 / 100.0;
            let y = map.apply(x);
            assert!(y >= prev - 1e-12, "not monotone at {x}");
            prev = y;
        }
    }

    #[test]
    fn constant_destination_is_an_error() {
        let src: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let dst = vec![42.0; 10];
        assert!(matches!(
            fit_merge_map(&src, &dst),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn scores_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        std::fs::write(
            &path,
            "subject_id,video_id,device_id,score\ns1,v1,tv1,42\ns2,v1,tv1,55.5\n",
        )
        .unwrap();
        let rows = read_scores_csv(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], score("s1", "v1", "tv1", 42.0));
        assert_eq!(rows[1].score, 55.5);
    }
}
