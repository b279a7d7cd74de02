//! No-reference video quality assessment for HDR and SDR content.
//!
//! The library is organised as a set of feature banks over decoded luma
//! planes (natural scene statistics, patch-contrast statistics, local
//! expansive nonlinearity statistics, spatiotemporal gradient chips, and a
//! pristine-model distance), plus the plumbing a VQA study needs around
//! them: raw YUV ingestion, a from-scratch random forest regressor,
//! subjective score recovery, and a split/evaluate protocol harness.
//!
//! Entry points:
//! - [`media::open_video`] streams planar YUV420 frames as normalized planes.
//! - [`features::extract_video`] produces one feature vector per clip.
//! - [`forest::train_forest`] / [`forest::ForestModel::predict`] map
//!   features to quality scores.
//! - [`eval::evaluate_splits`] runs the train/test protocol and reports
//!   SRCC/PLCC/RMSE aggregates.

pub mod config;
pub mod descriptors;
pub mod error;
pub mod eval;
pub mod features;
pub mod forest;
pub mod fr;
pub mod hdrmax;
pub mod media;
pub mod niqe;
pub mod nss;
pub mod optim;
pub mod patchmax;
pub mod plane;
pub mod stchips;
pub mod subjective;
pub mod synth;
pub(crate) mod temporal;

pub use error::{Error, Result};
pub use plane::FramePlane;
