//! Random-forest regression: CART trees on bootstrap samples with
//! per-split feature subsampling, cross-validated hyperparameter
//! selection, content-aware train/test splits, and a compact binary
//! model format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{MaxFeatures, RegressorConfig};
use crate::error::{Error, Result};
use crate::eval;

const MAGIC: &[u8; 4] = b"HPRF";
const FORMAT_VERSION: u32 = 1;

/// One tree node; `feature` is -1 at leaves, where `value` holds the
/// mean training target of the leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub feature: i32,
    pub threshold: f64,
    pub value: f64,
    pub left: u32,
    pub right: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let node = &self.nodes[i];
            if node.feature < 0 {
                return node.value;
            }
            i = if row[node.feature as usize] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub max_features: MaxFeatures,
    /// Feature layout the model was trained on; predictions must match.
    pub layout: String,
    pub n_features: usize,
    pub seed: u64,
}

impl ForestModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict(&self, x: &[Vec<f64>], layout: &str) -> Result<Vec<f64>> {
        if layout != self.layout {
            return Err(Error::LayoutMismatch {
                expected: self.layout.clone(),
                found: layout.to_string(),
            });
        }
        for (i, row) in x.iter().enumerate() {
            if row.len() != self.n_features {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} features, model expects {}",
                    row.len(),
                    self.n_features
                )));
            }
        }
        Ok(x.iter().map(|row| self.predict_row(row)).collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(&mut &bytes[..])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        Self::read_from(&mut r).map_err(|e| match e {
            Error::BadMetadata(d) => Error::parse(path, d),
            other => other,
        })
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u64::<LittleEndian>(self.seed)?;
        w.write_u8(match self.max_features {
            MaxFeatures::Sqrt => 0,
            MaxFeatures::OneThird => 1,
            MaxFeatures::All => 2,
        })?;
        w.write_u32::<LittleEndian>(self.n_features as u32)?;
        w.write_u32::<LittleEndian>(self.layout.len() as u32)?;
        w.write_all(self.layout.as_bytes())?;
        w.write_u32::<LittleEndian>(self.trees.len() as u32)?;
        for tree in &self.trees {
            w.write_u32::<LittleEndian>(tree.nodes.len() as u32)?;
            for n in &tree.nodes {
                w.write_i32::<LittleEndian>(n.feature)?;
                w.write_f64::<LittleEndian>(n.threshold)?;
                w.write_f64::<LittleEndian>(n.value)?;
                w.write_u32::<LittleEndian>(n.left)?;
                w.write_u32::<LittleEndian>(n.right)?;
            }
        }
        Ok(())
    }

    fn read_from(r: &mut impl Read) -> Result<Self> {
        let bad = |d: String| Error::BadMetadata(d);
        let io = |e: std::io::Error| Error::BadMetadata(format!("truncated model file: {e}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(bad("not a forest model file".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(io)?;
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported model format version {version}")));
        }
        let seed = r.read_u64::<LittleEndian>().map_err(io)?;
        let max_features = match r.read_u8().map_err(io)? {
            0 => MaxFeatures::Sqrt,
            1 => MaxFeatures::OneThird,
            2 => MaxFeatures::All,
            other => return Err(bad(format!("unknown feature mode tag {other}"))),
        };
        let n_features = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        let layout_len = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        if layout_len > 1 << 16 {
            return Err(bad("implausible layout name length".into()));
        }
        let mut layout_bytes = vec![0u8; layout_len];
        r.read_exact(&mut layout_bytes).map_err(io)?;
        let layout = String::from_utf8(layout_bytes)
            .map_err(|_| bad("layout name is not UTF-8".into()))?;
        let n_trees = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n_nodes = r.read_u32::<LittleEndian>().map_err(io)? as usize;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let feature = r.read_i32::<LittleEndian>().map_err(io)?;
                let threshold = r.read_f64::<LittleEndian>().map_err(io)?;
                let value = r.read_f64::<LittleEndian>().map_err(io)?;
                let left = r.read_u32::<LittleEndian>().map_err(io)?;
                let right = r.read_u32::<LittleEndian>().map_err(io)?;
                if feature >= 0 && (left as usize >= n_nodes || right as usize >= n_nodes) {
                    return Err(bad("tree child index out of range".into()));
                }
                nodes.push(Node {
                    feature,
                    threshold,
                    value,
                    left,
                    right,
                });
            }
            if nodes.is_empty() {
                return Err(bad("empty tree".into()));
            }
            trees.push(Tree { nodes });
        }
        if trees.is_empty() {
            return Err(bad("model holds no trees".into()));
        }
        Ok(Self {
            trees,
            max_features,
            layout,
            n_features,
            seed,
        })
    }
}

/// n draws with replacement; the first thing a tree's generator emits,
/// so out-of-bag sets can be reconstructed from (seed, tree index).
pub(crate) fn bootstrap_indices(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    k: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    feat_pool: Vec<usize>,
}

impl Grower<'_> {
    fn grow(&mut self, idx: Vec<usize>) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            feature: -1,
            threshold: 0.0,
            value: 0.0,
            left: 0,
            right: 0,
        });
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
        let pure = idx.iter().all(|&i| self.y[i] == self.y[idx[0]]);
        if idx.len() < 2 || pure {
            self.nodes[id as usize].value = mean;
            return id;
        }

        let d = self.feat_pool.len();
        for j in 0..self.k {
            let pick = self.rng.gen_range(j..d);
            self.feat_pool.swap(j, pick);
        }

        // Minimum summed squared error over candidate splits; ties keep
        // the first candidate encountered.
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.clone();
        for pos in 0..self.k {
            let f = self.feat_pool[pos];
            order.copy_from_slice(&idx);
            order.sort_unstable_by(|&a, &b| {
                self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b))
            });
            let total: f64 = order.iter().map(|&i| self.y[i]).sum();
            let mut sum_l = 0.0;
            let mut sq_l = 0.0;
            let sq_total: f64 = order.iter().map(|&i| self.y[i] * self.y[i]).sum();
            let n = order.len() as f64;
            for j in 1..order.len() {
                let yi = self.y[order[j - 1]];
                sum_l += yi;
                sq_l += yi * yi;
                let (xa, xb) = (self.x[order[j - 1]][f], self.x[order[j]][f]);
                if xa == xb {
                    continue;
                }
                let nl = j as f64;
                let nr = n - nl;
                let sum_r = total - sum_l;
                let sse = (sq_l - sum_l * sum_l / nl) + ((sq_total - sq_l) - sum_r * sum_r / nr);
                if best.is_none() || best.as_ref().unwrap().0 > sse {
                    best = Some((sse, f, 0.5 * (xa + xb)));
                }
            }
        }

        let Some((_, feature, threshold)) = best else {
            // Every candidate feature is constant here: leaf.
            self.nodes[id as usize].value = mean;
            return id;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.grow(left_idx);
        let right = self.grow(right_idx);
        let node = &mut self.nodes[id as usize];
        node.feature = feature as i32;
        node.threshold = threshold;
        node.left = left;
        node.right = right;
        id
    }
}

fn grow_tree(x: &[Vec<f64>], y: &[f64], k: usize, seed: u64) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = bootstrap_indices(&mut rng, y.len());
    let mut grower = Grower {
        x,
        y,
        k,
        rng,
        nodes: Vec::new(),
        feat_pool: (0..x[0].len()).collect(),
    };
    grower.grow(idx);
    Tree {
        nodes: grower.nodes,
    }
}

/// Fit one forest with fixed hyperparameters. Tree i draws from a
/// generator seeded `seed + i`, so training is deterministic whatever
/// the thread count.
pub fn fit_forest(
    x: &[Vec<f64>],
    y: &[f64],
    n_estimators: usize,
    max_features: MaxFeatures,
    layout: &str,
    seed: u64,
) -> Result<ForestModel> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows vs {} targets",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() || n_estimators == 0 {
        return Err(Error::InvalidConfig(
            "training needs at least one row and one tree".into(),
        ));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::DimensionMismatch("ragged or empty feature rows".into()));
    }
    let k = max_features.count(d);
    let trees: Vec<Tree> = (0..n_estimators)
        .into_par_iter()
        .map(|i| grow_tree(x, y, k, seed + i as u64))
        .collect();
    Ok(ForestModel {
        trees,
        max_features,
        layout: layout.to_string(),
        n_features: d,
        seed,
    })
}

/// Columns holding any non-finite entry, sorted.
fn non_finite_columns(x: &[Vec<f64>]) -> Vec<usize> {
    let mut cols: Vec<usize> = Vec::new();
    for row in x {
        for (c, v) in row.iter().enumerate() {
            if !v.is_finite() && !cols.contains(&c) {
                cols.push(c);
            }
        }
    }
    cols.sort_unstable();
    cols
}

/// Cross-validated training: every (n_estimators, max_features) pair in
/// the grid is scored by mean fold SRCC, the winner (ties toward fewer
/// trees, then grid order) is refit on all rows.
pub fn train_forest(
    x: &[Vec<f64>],
    y: &[f64],
    cfg: &RegressorConfig,
    layout: &str,
    seed: u64,
) -> Result<ForestModel> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows vs {} targets",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 10 {
        return Err(Error::TooSmall(format!(
            "training needs at least 10 rows, got {}",
            x.len()
        )));
    }
    let cols = non_finite_columns(x);
    if !cols.is_empty() {
        return Err(Error::NonFinite(format!(
            "feature columns {cols:?} contain non-finite values"
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets contain non-finite values".into()));
    }
    if cfg.n_estimators.is_empty() || cfg.max_features.is_empty() || cfg.cv_folds < 2 {
        return Err(Error::InvalidConfig(
            "hyperparameter grid is empty or folds < 2".into(),
        ));
    }

    let n = x.len();
    let folds = cfg.cv_folds.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    // Contiguous fold boundaries over the shuffled order.
    let fold_range = |f: usize| (f * n / folds)..((f + 1) * n / folds);

    let mut best: Option<(f64, usize, MaxFeatures)> = None;
    for &n_est in &cfg.n_estimators {
        for &mode in &cfg.max_features {
            let mut score_sum = 0.0;
            for f in 0..folds {
                let test_set = &order[fold_range(f)];
                let train_set: Vec<usize> = (0..folds)
                    .filter(|&g| g != f)
                    .flat_map(|g| order[fold_range(g)].iter().copied())
                    .collect();
                let xt: Vec<Vec<f64>> = train_set.iter().map(|&i| x[i].clone()).collect();
                let yt: Vec<f64> = train_set.iter().map(|&i| y[i]).collect();
                let model = fit_forest(&xt, &yt, n_est, mode, layout, seed)?;
                let pred: Vec<f64> = test_set.iter().map(|&i| model.predict_row(&x[i])).collect();
                let truth: Vec<f64> = test_set.iter().map(|&i| y[i]).collect();
                score_sum += eval::srcc(&pred, &truth).unwrap_or(0.0);
            }
            let score = score_sum / folds as f64;
            let better = match &best {
                None => true,
                Some((s, ne, _)) => score > *s || (score == *s && n_est < *ne),
            };
            if better {
                best = Some((score, n_est, mode));
            }
        }
    }
    let (_, n_est, mode) = best.expect("non-empty grid");
    fit_forest(x, y, n_est, mode, layout, seed)
}

/// One train/test assignment over video indices; videos sharing a
/// content never straddle the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub trial: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Content-aware random splits: per trial, contents are shuffled and
/// assigned whole to the training side until it covers at least
/// `ratio` of the videos; the remaining contents form the test side.
pub fn make_splits(
    contents: &[String],
    ratio: f64,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<SplitSpec>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "split ratio {ratio} outside (0, 1)"
        )));
    }
    if n_trials == 0 {
        return Err(Error::InvalidConfig("no trials requested".into()));
    }
    // Distinct contents in first-appearance order.
    let mut unique: Vec<&str> = Vec::new();
    for c in contents {
        if !unique.contains(&c.as_str()) {
            unique.push(c);
        }
    }
    if unique.len() < 2 {
        return Err(Error::Invalid(format!(
            "content-aware splits need at least 2 distinct contents, got {}",
            unique.len()
        )));
    }
    if unique.len() < 5 {
        warn!(
            "only {} distinct contents; test sets will be very small",
            unique.len()
        );
    }
    let videos_of = |content: &str| -> Vec<usize> {
        contents
            .iter()
            .enumerate()
            .filter(|(_, c)| c.as_str() == content)
            .map(|(i, _)| i)
            .collect()
    };
    let n_videos = contents.len();

    let mut splits = Vec::with_capacity(n_trials);
    for trial in 0..n_trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + trial as u64);
        let mut shuffled = unique.clone();
        shuffled.shuffle(&mut rng);
        let mut train_contents: Vec<&str> = Vec::new();
        let mut train_count = 0usize;
        let mut rest = shuffled.iter();
        for &c in rest.by_ref() {
            if (train_count as f64) >= ratio * n_videos as f64 {
                break;
            }
            train_count += videos_of(c).len();
            train_contents.push(c);
        }
        let mut test_contents: Vec<&str> = shuffled
            .iter()
            .filter(|c| !train_contents.contains(c))
            .copied()
            .collect();
        if test_contents.is_empty() {
            let moved = train_contents.pop().expect("at least 2 contents");
            warn!("trial {trial}: every content landed in train; moving {moved:?} to test");
            test_contents.push(moved);
        }
        let mut train: Vec<usize> = train_contents.iter().flat_map(|c| videos_of(c)).collect();
        let mut test: Vec<usize> = test_contents.iter().flat_map(|c| videos_of(c)).collect();
        train.sort_unstable();
        test.sort_unstable();
        splits.push(SplitSpec { trial, train, test });
    }
    Ok(splits)
}

/// Append the display-device index as one trailing feature column.
pub fn augment_device_index(x: &[Vec<f64>], device_ids: &[u32]) -> Result<Vec<Vec<f64>>> {
    if x.len() != device_ids.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} device ids",
            x.len(),
            device_ids.len()
        )));
    }
    for &d in device_ids {
        if !(1..=3).contains(&d) {
            return Err(Error::Invalid(format!("device id {d} outside 1..=3")));
        }
    }
    Ok(x.iter()
        .zip(device_ids)
        .map(|(row, &d)| {
            let mut r = row.clone();
            r.push(d as f64);
            r
        })
        .collect())
}

/// Layout name of a device-augmented feature matrix.
pub fn augmented_layout(layout: &str) -> String {
    format!("{layout}+tv")
}
