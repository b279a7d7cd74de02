//! Batch command-line surface over the toolkit: clip probing, feature
//! extraction, regressor training and prediction, the repeated-split
//! evaluation protocol, subjective score recovery, study merging,
//! content descriptors, full-reference metrics, and pristine-model
//! training.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! error (including layout and metadata mismatches).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};
use rayon::prelude::*;

use hdrpatchmax::config::ToolkitConfig;
use hdrpatchmax::descriptors::DescriptorAccumulator;
use hdrpatchmax::eval::{evaluate_splits, TrialOutcome};
use hdrpatchmax::features::{extract_video, FeatureLayout, FeatureTable};
use hdrpatchmax::forest::{augment_device_index, augmented_layout, make_splits, train_forest, ForestModel};
use hdrpatchmax::media::{self, open_video, Gamut, PixelFormat, Range, Transfer, VideoMeta};
use hdrpatchmax::niqe::{train_pristine_model, NiqeModel};
use hdrpatchmax::subjective::{self, read_scores_csv, solve_mos};
use hdrpatchmax::{fr, Error, FramePlane, Result};

#[derive(Parser)]
#[command(
    name = "hdrpatchmax",
    version,
    about = "No-reference video quality assessment for HDR and SDR content",
    after_help = config_help()
)]
struct Cli {
    /// TOML configuration file; missing sections keep their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one config key on top of the file, e.g. --set patchmax.patch_size=32.
    #[arg(long, global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Seed behind every random choice this invocation makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (0 = one per core). HDRPATCHMAX_THREADS sets the default.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a raw clip against its metadata; report frame count and code-range violations as JSON.
    #[command(after_help = config_help())]
    Probe {
        /// Raw planar YUV file.
        input: PathBuf,
        #[command(flatten)]
        meta: MetaArgs,
    },

    /// Extract one feature row per clip into a CSV table.
    #[command(after_help = config_help())]
    Extract {
        /// Raw planar YUV files; each needs a sidecar JSON or full metadata flags.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Feature table destination.
        #[arg(long, value_name = "CSV")]
        output: PathBuf,
        /// Feature layout; defaults to features.layout from the config.
        #[arg(long)]
        layout: Option<String>,
        /// Pristine model JSON; defaults to the bundled model.
        #[arg(long, value_name = "JSON")]
        model: Option<PathBuf>,
        #[command(flatten)]
        meta: MetaArgs,
    },

    /// Train the quality regressor from a feature table and per-video scores.
    #[command(after_help = config_help())]
    TrainModel {
        /// Feature table from `extract`.
        #[arg(long, value_name = "CSV")]
        features: PathBuf,
        /// Header video_id,score; or video_id,device_index,score for a device-augmented model.
        #[arg(long, value_name = "CSV")]
        scores: PathBuf,
        /// Model destination (versioned binary).
        #[arg(long, value_name = "BIN")]
        out: PathBuf,
    },

    /// Predict quality scores for a feature table with a trained model.
    #[command(after_help = config_help())]
    Predict {
        #[arg(long, value_name = "CSV")]
        features: PathBuf,
        #[arg(long, value_name = "BIN")]
        model: PathBuf,
        /// Predictions CSV destination; stdout if omitted.
        #[arg(long, value_name = "CSV")]
        output: Option<PathBuf>,
        /// Augment every row with this display-device index (1..=3) before predicting.
        #[arg(long, value_name = "INDEX", value_parser = clap::value_parser!(u32).range(1..=3))]
        device: Option<u32>,
    },

    /// Run repeated content-separated splits and report SRCC/PLCC/RMSE aggregates.
    #[command(after_help = config_help())]
    Evaluate {
        #[arg(long, value_name = "CSV")]
        features: PathBuf,
        /// Header video_id,content_id,score.
        #[arg(long, value_name = "CSV")]
        scores: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Fraction of videos routed (by whole contents) to the training side.
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        /// Writes <prefix>.trials.csv, <prefix>.scatter.csv and <prefix>.summary.json.
        #[arg(long, value_name = "PREFIX")]
        out_prefix: PathBuf,
    },

    /// Recover MOS (and optionally DMOS) from raw subjective scores.
    #[command(after_help = config_help())]
    Mos {
        /// Header subject_id,video_id,device_id,score.
        #[arg(long, value_name = "CSV")]
        scores: PathBuf,
        /// MOS table destination; stdout if omitted.
        #[arg(long, value_name = "CSV")]
        output: Option<PathBuf>,
        /// Reference map (header video_id,reference_id) adding a dmos column.
        #[arg(long, value_name = "CSV")]
        dmos: Option<PathBuf>,
        /// Also report split-half consistency per device over this many trials, as JSON on stdout.
        #[arg(long, value_name = "N")]
        consistency: Option<usize>,
    },

    /// Fit a logistic map carrying one study's MOS scale onto another's.
    #[command(after_help = config_help())]
    Merge {
        /// Source-study MOS table (header video_id,device_id,mos).
        #[arg(long, value_name = "CSV")]
        src: PathBuf,
        /// Destination-study MOS table; shared (video, device) items anchor the fit.
        #[arg(long, value_name = "CSV")]
        dst: PathBuf,
        /// Fitted map JSON destination; stdout if omitted.
        #[arg(long, value_name = "JSON")]
        output: Option<PathBuf>,
        /// MOS table to push through the fitted map.
        #[arg(long, value_name = "CSV", requires = "applied")]
        apply: Option<PathBuf>,
        /// Destination for the mapped table.
        #[arg(long, value_name = "CSV")]
        applied: Option<PathBuf>,
    },

    /// Emit per-clip content descriptors: SI, TI, colorfulness, average luminance.
    #[command(after_help = config_help())]
    Descriptors {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Descriptor CSV destination; stdout if omitted.
        #[arg(long, value_name = "CSV")]
        output: Option<PathBuf>,
        #[command(flatten)]
        meta: MetaArgs,
    },

    /// Full-reference PSNR and SSIM between two aligned clips.
    #[command(after_help = config_help())]
    Fr {
        /// Reference clip.
        #[arg(long = "ref", value_name = "YUV")]
        reference: PathBuf,
        /// Distorted clip.
        #[arg(long, value_name = "YUV")]
        dist: PathBuf,
        /// Metric CSV destination; stdout if omitted.
        #[arg(long, value_name = "CSV")]
        output: Option<PathBuf>,
        #[command(flatten)]
        meta: MetaArgs,
    },

    /// Fit the pristine patch model from clean clips.
    #[command(after_help = config_help())]
    NiqeTrain {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Model JSON destination.
        #[arg(long, value_name = "JSON")]
        out: PathBuf,
        #[command(flatten)]
        meta: MetaArgs,
    },
}

/// Metadata overrides. Values from a clip's sidecar JSON are the
/// baseline; any flag given here wins over the sidecar field. Clips
/// without a sidecar need at least --width, --height and --pixel-format.
#[derive(Args)]
struct MetaArgs {
    #[arg(long, value_name = "PX", help_heading = "Metadata")]
    width: Option<usize>,
    #[arg(long, value_name = "PX", help_heading = "Metadata")]
    height: Option<usize>,
    /// yuv420p or yuv420p10le.
    #[arg(long, value_parser = parse_pixel_format, help_heading = "Metadata")]
    pixel_format: Option<PixelFormat>,
    #[arg(long, help_heading = "Metadata")]
    bit_depth: Option<u8>,
    #[arg(long, help_heading = "Metadata")]
    fps: Option<f64>,
    /// limited or full.
    #[arg(long, value_parser = parse_range, help_heading = "Metadata")]
    range: Option<Range>,
    /// pq or bt709.
    #[arg(long, value_parser = parse_transfer, help_heading = "Metadata")]
    transfer: Option<Transfer>,
    /// bt2020 or bt709.
    #[arg(long, value_parser = parse_gamut, help_heading = "Metadata")]
    gamut: Option<Gamut>,
}

fn parse_pixel_format(s: &str) -> std::result::Result<PixelFormat, String> {
    match s {
        "yuv420p" => Ok(PixelFormat::Yuv420p),
        "yuv420p10le" => Ok(PixelFormat::Yuv420p10le),
        other => Err(format!("unknown pixel format {other:?}, expected yuv420p or yuv420p10le")),
    }
}

fn parse_range(s: &str) -> std::result::Result<Range, String> {
    match s {
        "limited" => Ok(Range::Limited),
        "full" => Ok(Range::Full),
        other => Err(format!("unknown range {other:?}, expected limited or full")),
    }
}

fn parse_transfer(s: &str) -> std::result::Result<Transfer, String> {
    match s {
        "pq" => Ok(Transfer::Pq),
        "bt709" => Ok(Transfer::Bt709),
        other => Err(format!("unknown transfer {other:?}, expected pq or bt709")),
    }
}

fn parse_gamut(s: &str) -> std::result::Result<Gamut, String> {
    match s {
        "bt2020" => Ok(Gamut::Bt2020),
        "bt709" => Ok(Gamut::Bt709),
        other => Err(format!("unknown gamut {other:?}, expected bt2020 or bt709")),
    }
}

/// One aligned line per config key so every --help screen carries the
/// full set with its defaults.
fn config_help() -> String {
    let d = ToolkitConfig::default();
    let max_features = d
        .regressor
        .max_features
        .iter()
        .map(|m| m.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let rows: Vec<(&str, &str, String)> = vec![
        ("nss.c", "MSCN stabilizing constant", d.nss.c.to_string()),
        ("patchmax.patch_size", "square patch side in pixels", d.patchmax.patch_size.to_string()),
        ("patchmax.percentile", "extreme-contrast percentile", d.patchmax.percentile.to_string()),
        ("hdrmax.window", "analysis window side", d.hdrmax.window.to_string()),
        ("hdrmax.stride", "output cell stride", d.hdrmax.stride.to_string()),
        ("hdrmax.delta", "expansive nonlinearity gain", d.hdrmax.delta.to_string()),
        ("stchips.temporal_a", "temporal bandpass decay", d.stchips.temporal_a.to_string()),
        ("niqe.patch_size", "pristine-model patch side", d.niqe.patch_size.to_string()),
        ("niqe.sharpness_fraction", "patch selection threshold", d.niqe.sharpness_fraction.to_string()),
        ("regressor.n_estimators", "forest size grid", format!("{:?}", d.regressor.n_estimators)),
        ("regressor.max_features", "per-split feature subsampling grid", format!("[{max_features}]")),
        ("regressor.cv_folds", "cross-validation folds", d.regressor.cv_folds.to_string()),
        ("features.layout", "feature table layout", d.features.layout),
    ];
    let mut out = String::from("Config keys (--config FILE supplies TOML sections; --set KEY=VALUE overrides single keys):\n");
    for (key, what, default) in rows {
        out.push_str(&format!("  {key:<24} {what} (default: {default})\n"));
    }
    out.pop();
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) | Error::BadMetadata(_) | Error::LayoutMismatch { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    init_threads(cli.threads)?;
    let mut cfg = match &cli.config {
        Some(path) => ToolkitConfig::from_path(path)?,
        None => ToolkitConfig::default(),
    };
    for assignment in &cli.set {
        cfg.apply_override(assignment)?;
    }
    cfg.validate()?;
    let seed = cli.seed;
    match cli.command {
        Command::Probe { input, meta } => cmd_probe(&input, &meta),
        Command::Extract { inputs, output, layout, model, meta } => {
            cmd_extract(&inputs, &output, layout.as_deref(), model.as_deref(), &meta, &cfg)
        }
        Command::TrainModel { features, scores, out } => cmd_train(&features, &scores, &out, &cfg, seed),
        Command::Predict { features, model, output, device } => {
            cmd_predict(&features, &model, output.as_deref(), device)
        }
        Command::Evaluate { features, scores, trials, ratio, out_prefix } => {
            cmd_evaluate(&features, &scores, trials, ratio, &out_prefix, &cfg, seed)
        }
        Command::Mos { scores, output, dmos, consistency } => {
            cmd_mos(&scores, output.as_deref(), dmos.as_deref(), consistency, seed)
        }
        Command::Merge { src, dst, output, apply, applied } => {
            cmd_merge(&src, &dst, output.as_deref(), apply.as_deref(), applied.as_deref())
        }
        Command::Descriptors { inputs, output, meta } => cmd_descriptors(&inputs, output.as_deref(), &meta),
        Command::Fr { reference, dist, output, meta } => cmd_fr(&reference, &dist, output.as_deref(), &meta),
        Command::NiqeTrain { inputs, out, meta } => cmd_niqe_train(&inputs, &out, &meta, &cfg),
    }
}

/// Thread-count precedence: --threads flag, then HDRPATCHMAX_THREADS,
/// then one worker per core.
fn init_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("HDRPATCHMAX_THREADS") {
            Ok(s) => Some(s.trim().parse::<usize>().map_err(|_| {
                Error::InvalidConfig(format!("HDRPATCHMAX_THREADS={s:?} is not a thread count"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Sidecar metadata with flag overrides applied; flags alone suffice when
/// no sidecar exists. An explicit --pixel-format re-derives the bit depth
/// unless --bit-depth is also given.
fn resolve_meta(video: &Path, args: &MetaArgs) -> Result<VideoMeta> {
    let sidecar = VideoMeta::sidecar_path(video);
    let mut meta = if sidecar.exists() {
        VideoMeta::from_sidecar(video)?
    } else {
        let (Some(width), Some(height), Some(pixel_format)) = (args.width, args.height, args.pixel_format)
        else {
            return Err(Error::BadMetadata(format!(
                "{}: no sidecar {} and no --width/--height/--pixel-format flags",
                video.display(),
                sidecar.display()
            )));
        };
        let wide = pixel_format == PixelFormat::Yuv420p10le;
        VideoMeta {
            width,
            height,
            bit_depth: pixel_format.bit_depth(),
            pixel_format,
            fps: 30.0,
            range: Range::Limited,
            transfer: if wide { Transfer::Pq } else { Transfer::Bt709 },
            gamut: if wide { Gamut::Bt2020 } else { Gamut::Bt709 },
        }
    };
    if let Some(v) = args.pixel_format {
        meta.pixel_format = v;
        meta.bit_depth = v.bit_depth();
    }
    if let Some(v) = args.width {
        meta.width = v;
    }
    if let Some(v) = args.height {
        meta.height = v;
    }
    if let Some(v) = args.bit_depth {
        meta.bit_depth = v;
    }
    if let Some(v) = args.fps {
        meta.fps = v;
    }
    if let Some(v) = args.range {
        meta.range = v;
    }
    if let Some(v) = args.transfer {
        meta.transfer = v;
    }
    if let Some(v) = args.gamut {
        meta.gamut = v;
    }
    meta.validate()?;
    Ok(meta)
}

fn stem_id(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| {
            Error::Invalid(format!("{}: cannot derive a video id from the file name", path.display()))
        })
}

fn luma_frames(path: &Path, meta: &VideoMeta) -> Result<Vec<FramePlane>> {
    open_video(path, meta)?.map(|r| r.map(|f| f.y)).collect()
}

/// Rows of preformatted cells to CSV bytes; quoting is the writer's job.
fn to_csv(rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(row).map_err(|e| Error::Invalid(format!("csv write: {e}")))?;
    }
    w.into_inner().map_err(|e| Error::Invalid(format!("csv write: {e}")))
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|()| out.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn to_json_pretty<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Invalid(format!("json write: {e}")))
}

fn cmd_probe(input: &Path, meta_args: &MetaArgs) -> Result<()> {
    let meta = resolve_meta(input, meta_args)?;
    let report = media::probe(input, &meta)?;
    write_bytes(None, to_json_pretty(&report)?.as_bytes())
}

fn cmd_extract(
    inputs: &[PathBuf],
    output: &Path,
    layout_flag: Option<&str>,
    model_path: Option<&Path>,
    meta_args: &MetaArgs,
    cfg: &ToolkitConfig,
) -> Result<()> {
    let layout = FeatureLayout::parse(layout_flag.unwrap_or(&cfg.features.layout))?;
    let model = match model_path {
        Some(p) => NiqeModel::load(p)?,
        None => NiqeModel::bundled(),
    };
    let ids: Vec<String> = inputs.iter().map(|p| stem_id(p)).collect::<Result<_>>()?;
    let mut seen = BTreeSet::new();
    for id in &ids {
        if !seen.insert(id.clone()) {
            return Err(Error::InvalidConfig(format!(
                "duplicate video id {id:?} among inputs; ids are file stems"
            )));
        }
    }
    let results: Vec<Result<Vec<f64>>> = inputs
        .par_iter()
        .map(|path| {
            let meta = resolve_meta(path, meta_args)?;
            let reader = open_video(path, &meta)?;
            extract_video(reader.map(|r| r.map(|f| f.y)), layout, cfg, &model)
        })
        .collect();
    let mut table = FeatureTable::new(layout);
    let mut failed = 0usize;
    for ((path, id), row) in inputs.iter().zip(ids).zip(results) {
        match row {
            Ok(row) => {
                info!("extracted {}", path.display());
                table.push(id, row)?;
            }
            Err(e) => {
                failed += 1;
                error!("{}: {e}", path.display());
            }
        }
    }
    table.write_csv(output)?;
    info!("wrote {} rows ({}) to {}", table.ids.len(), layout.name(), output.display());
    if failed > 0 {
        return Err(Error::Invalid(format!("{failed} of {} clips failed", inputs.len())));
    }
    Ok(())
}

/// Per-video training targets, optionally expanded per display device.
enum TrainScores {
    Plain(BTreeMap<String, f64>),
    Device(Vec<(String, u32, f64)>),
}

fn read_train_scores(path: &Path) -> Result<TrainScores> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let cols: Vec<&str> = headers.iter().map(String::as_str).collect();
    match cols.as_slice() {
        ["video_id", "score"] => {
            let mut map = BTreeMap::new();
            for row in reader.deserialize() {
                let (video, score): (String, f64) = row.map_err(|e| Error::parse(path, e.to_string()))?;
                if map.insert(video.clone(), score).is_some() {
                    return Err(Error::parse(path, format!("duplicate score for video {video:?}")));
                }
            }
            Ok(TrainScores::Plain(map))
        }
        ["video_id", "device_index", "score"] => {
            let mut rows = Vec::new();
            for row in reader.deserialize() {
                let triple: (String, u32, f64) = row.map_err(|e| Error::parse(path, e.to_string()))?;
                rows.push(triple);
            }
            Ok(TrainScores::Device(rows))
        }
        other => Err(Error::parse(
            path,
            format!(
                "expected header video_id,score or video_id,device_index,score, found {:?}",
                other.join(",")
            ),
        )),
    }
}

fn cmd_train(features: &Path, scores: &Path, out: &Path, cfg: &ToolkitConfig, seed: u64) -> Result<()> {
    let table = FeatureTable::read_csv(features)?;
    let model = match read_train_scores(scores)? {
        TrainScores::Plain(map) => {
            let mut y = Vec::with_capacity(table.ids.len());
            for id in &table.ids {
                let Some(&s) = map.get(id) else {
                    return Err(Error::Invalid(format!(
                        "no score for video {id:?} in {}",
                        scores.display()
                    )));
                };
                y.push(s);
            }
            train_forest(&table.rows, &y, &cfg.regressor, table.layout.name(), seed)?
        }
        TrainScores::Device(rows) => {
            if table.layout.has_device_column() {
                return Err(Error::InvalidConfig(
                    "--scores lists device indices but the feature table already carries a device column"
                        .into(),
                ));
            }
            let index_of: BTreeMap<&str, usize> = table
                .ids
                .iter()
                .enumerate()
                .map(|(i, id)| (id.as_str(), i))
                .collect();
            let mut x = Vec::with_capacity(rows.len());
            let mut devices = Vec::with_capacity(rows.len());
            let mut y = Vec::with_capacity(rows.len());
            let mut scored: BTreeSet<&str> = BTreeSet::new();
            for (video, device, score) in &rows {
                let Some(&i) = index_of.get(video.as_str()) else {
                    return Err(Error::Invalid(format!(
                        "no feature row for video {video:?} in {}",
                        features.display()
                    )));
                };
                scored.insert(video.as_str());
                x.push(table.rows[i].clone());
                devices.push(*device);
                y.push(*score);
            }
            for id in &table.ids {
                if !scored.contains(id.as_str()) {
                    warn!("video {id:?} has features but no score; excluded from training");
                }
            }
            let x = augment_device_index(&x, &devices)?;
            let layout = augmented_layout(table.layout.name());
            train_forest(&x, &y, &cfg.regressor, &layout, seed)?
        }
    };
    model.save(out)?;
    info!(
        "trained {} trees ({} features, layout {}) to {}",
        model.trees.len(),
        model.n_features,
        model.layout,
        out.display()
    );
    Ok(())
}

fn cmd_predict(features: &Path, model_path: &Path, output: Option<&Path>, device: Option<u32>) -> Result<()> {
    let table = FeatureTable::read_csv(features)?;
    let model = ForestModel::load(model_path)?;
    let (rows, layout_name) = match device {
        Some(d) => {
            let devices = vec![d; table.rows.len()];
            (
                augment_device_index(&table.rows, &devices)?,
                augmented_layout(table.layout.name()),
            )
        }
        None => (table.rows.clone(), table.layout.name().to_string()),
    };
    let predictions = model.predict(&rows, &layout_name)?;
    let mut csv_rows = vec![vec!["video_id".to_string(), "prediction".to_string()]];
    for (id, p) in table.ids.iter().zip(&predictions) {
        csv_rows.push(vec![id.clone(), format!("{p}")]);
    }
    write_bytes(output, &to_csv(&csv_rows)?)
}

fn read_eval_scores(path: &Path) -> Result<BTreeMap<String, (String, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers != ["video_id", "content_id", "score"] {
        return Err(Error::parse(
            path,
            format!(
                "expected header video_id,content_id,score, found {:?}",
                headers.join(",")
            ),
        ));
    }
    let mut map = BTreeMap::new();
    for row in reader.deserialize() {
        let (video, content, score): (String, String, f64) =
            row.map_err(|e| Error::parse(path, e.to_string()))?;
        if map.insert(video.clone(), (content, score)).is_some() {
            return Err(Error::parse(path, format!("duplicate score for video {video:?}")));
        }
    }
    Ok(map)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}", prefix.display()))
}

fn cmd_evaluate(
    features: &Path,
    scores: &Path,
    trials: usize,
    ratio: f64,
    out_prefix: &Path,
    cfg: &ToolkitConfig,
    seed: u64,
) -> Result<()> {
    let table = FeatureTable::read_csv(features)?;
    let score_of = read_eval_scores(scores)?;
    let mut contents = Vec::with_capacity(table.ids.len());
    let mut y = Vec::with_capacity(table.ids.len());
    for id in &table.ids {
        let Some((content, score)) = score_of.get(id) else {
            return Err(Error::Invalid(format!(
                "no score for video {id:?} in {}",
                scores.display()
            )));
        };
        contents.push(content.clone());
        y.push(*score);
    }
    let splits = make_splits(&contents, ratio, trials, seed)?;
    let report = evaluate_splits(&table.rows, &y, &splits, &cfg.regressor, table.layout.name(), seed)?;

    let mut trial_rows = vec![
        ["trial", "status", "srcc", "plcc", "rmse", "fit_converged"]
            .map(str::to_string)
            .to_vec(),
    ];
    let mut scatter_rows = vec![
        ["trial", "video_id", "prediction", "fitted", "target"]
            .map(str::to_string)
            .to_vec(),
    ];
    for outcome in &report.outcomes {
        match outcome {
            TrialOutcome::Ok(r) => {
                trial_rows.push(vec![
                    r.trial.to_string(),
                    "ok".to_string(),
                    format!("{}", r.srcc),
                    format!("{}", r.plcc),
                    format!("{}", r.rmse),
                    r.fit_converged.to_string(),
                ]);
                for p in &r.points {
                    scatter_rows.push(vec![
                        r.trial.to_string(),
                        table.ids[p.video].clone(),
                        format!("{}", p.prediction),
                        format!("{}", p.fitted),
                        format!("{}", p.target),
                    ]);
                }
            }
            TrialOutcome::Failed { trial, reason } => {
                warn!("trial {trial} failed: {reason}");
                trial_rows.push(vec![
                    trial.to_string(),
                    "failed".to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
            }
        }
    }
    write_bytes(Some(&with_suffix(out_prefix, ".trials.csv")), &to_csv(&trial_rows)?)?;
    write_bytes(Some(&with_suffix(out_prefix, ".scatter.csv")), &to_csv(&scatter_rows)?)?;
    let summary = serde_json::json!({
        "videos": table.ids.len(),
        "layout": table.layout.name(),
        "trials": trials,
        "train_ratio": ratio,
        "n_failed": report.n_failed,
        "srcc": { "median": report.srcc.median, "std": report.srcc.std },
        "plcc": { "median": report.plcc.median, "std": report.plcc.std },
        "rmse": { "median": report.rmse.median, "std": report.rmse.std },
    });
    let text = to_json_pretty(&summary)?;
    write_bytes(Some(&with_suffix(out_prefix, ".summary.json")), text.as_bytes())?;
    write_bytes(None, text.as_bytes())
}

fn read_reference_map(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers != ["video_id", "reference_id"] {
        return Err(Error::parse(
            path,
            format!("expected header video_id,reference_id, found {:?}", headers.join(",")),
        ));
    }
    let mut map = BTreeMap::new();
    for row in reader.deserialize() {
        let (video, reference): (String, String) = row.map_err(|e| Error::parse(path, e.to_string()))?;
        map.insert(video, reference);
    }
    Ok(map)
}

fn cmd_mos(
    scores_path: &Path,
    output: Option<&Path>,
    dmos_path: Option<&Path>,
    consistency: Option<usize>,
    seed: u64,
) -> Result<()> {
    let scores = read_scores_csv(scores_path)?;
    let solution = solve_mos(&scores)?;
    info!(
        "converged after {} sweeps, log-likelihood {:.4}",
        solution.sweeps, solution.log_likelihood
    );
    if !solution.floored_subjects.is_empty() {
        warn!("variance floor hit for subjects: {}", solution.floored_subjects.join(", "));
    }
    let dmos_of = match dmos_path {
        Some(p) => Some(subjective::dmos(&solution, &read_reference_map(p)?)?),
        None => None,
    };
    let header: Vec<String> = if dmos_of.is_some() {
        ["video_id", "device_id", "mos", "dmos"].map(str::to_string).to_vec()
    } else {
        ["video_id", "device_id", "mos"].map(str::to_string).to_vec()
    };
    let mut rows = vec![header];
    for ((video, device), psi) in &solution.psi {
        let mut row = vec![video.clone(), device.clone(), format!("{psi}")];
        if let Some(m) = &dmos_of {
            row.push(format!("{}", m[&(video.clone(), device.clone())]));
        }
        rows.push(row);
    }
    write_bytes(output, &to_csv(&rows)?)?;
    if let Some(n) = consistency {
        let r = subjective::internal_correlation(&scores, n, seed)?;
        write_bytes(None, to_json_pretty(&r)?.as_bytes())?;
    }
    Ok(())
}

/// MOS table keyed by (video, device). Extra columns such as dmos are
/// tolerated; only the first three are read.
fn read_mos_csv(path: &Path) -> Result<BTreeMap<(String, String), f64>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < 3 || headers[..3] != ["video_id", "device_id", "mos"] {
        return Err(Error::parse(
            path,
            format!(
                "expected header video_id,device_id,mos[,...], found {:?}",
                headers.join(",")
            ),
        ));
    }
    let mut map = BTreeMap::new();
    for row in reader.records() {
        let record = row.map_err(|e| Error::parse(path, e.to_string()))?;
        let video = record.get(0).unwrap_or_default().to_string();
        let device = record.get(1).unwrap_or_default().to_string();
        let mos: f64 = record
            .get(2)
            .unwrap_or_default()
            .parse()
            .map_err(|_| Error::parse(path, format!("bad mos value for video {video:?}")))?;
        map.insert((video, device), mos);
    }
    Ok(map)
}

fn cmd_merge(
    src: &Path,
    dst: &Path,
    output: Option<&Path>,
    apply: Option<&Path>,
    applied: Option<&Path>,
) -> Result<()> {
    let src_mos = read_mos_csv(src)?;
    let dst_mos = read_mos_csv(dst)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = src_mos
        .iter()
        .filter_map(|(key, &v)| dst_mos.get(key).map(|&w| (v, w)))
        .unzip();
    info!("{} shared (video, device) anchors", xs.len());
    let map = subjective::fit_merge_map(&xs, &ys)?;
    write_bytes(output, to_json_pretty(&map)?.as_bytes())?;
    if let Some(apply_path) = apply {
        let to_map = read_mos_csv(apply_path)?;
        let mut rows = vec![["video_id", "device_id", "mos"].map(str::to_string).to_vec()];
        for ((video, device), mos) in &to_map {
            rows.push(vec![video.clone(), device.clone(), format!("{}", map.apply(*mos))]);
        }
        write_bytes(applied, &to_csv(&rows)?)?;
    }
    Ok(())
}

fn cmd_descriptors(inputs: &[PathBuf], output: Option<&Path>, meta_args: &MetaArgs) -> Result<()> {
    let mut rows = vec![
        ["path", "si", "ti", "colorfulness", "avg_luminance"]
            .map(str::to_string)
            .to_vec(),
    ];
    for path in inputs {
        let meta = resolve_meta(path, meta_args)?;
        let mut acc = DescriptorAccumulator::new(&meta);
        for frame in open_video(path, &meta)? {
            acc.push(&frame?)?;
        }
        let d = acc.finish()?;
        rows.push(vec![
            path.display().to_string(),
            format!("{}", d.si),
            format!("{}", d.ti),
            format!("{}", d.colorfulness),
            format!("{}", d.avg_luminance),
        ]);
    }
    write_bytes(output, &to_csv(&rows)?)
}

fn cmd_fr(reference: &Path, dist: &Path, output: Option<&Path>, meta_args: &MetaArgs) -> Result<()> {
    let ref_frames = luma_frames(reference, &resolve_meta(reference, meta_args)?)?;
    let dist_frames = luma_frames(dist, &resolve_meta(dist, meta_args)?)?;
    let psnr = fr::psnr_video(&ref_frames, &dist_frames)?;
    let ssim = fr::ssim_video(&ref_frames, &dist_frames)?;
    let rows = vec![
        ["ref", "dist", "psnr", "ssim"].map(str::to_string).to_vec(),
        vec![
            reference.display().to_string(),
            dist.display().to_string(),
            format!("{psnr}"),
            format!("{ssim}"),
        ],
    ];
    write_bytes(output, &to_csv(&rows)?)
}

fn cmd_niqe_train(inputs: &[PathBuf], out: &Path, meta_args: &MetaArgs, cfg: &ToolkitConfig) -> Result<()> {
    let mut frames = Vec::new();
    for path in inputs {
        let meta = resolve_meta(path, meta_args)?;
        frames.extend(luma_frames(path, &meta)?);
    }
    let model = train_pristine_model(&frames, &cfg.niqe, cfg.nss.c)?;
    model.save(out)?;
    info!(
        "fitted pristine model on {} frames from {} clips, wrote {}",
        frames.len(),
        inputs.len(),
        out.display()
    );
    Ok(())
}
