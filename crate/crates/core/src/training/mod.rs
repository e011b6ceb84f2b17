//! Dataset assembly, the learning-rate schedule and the training loop.

mod config;
mod dataset;
pub mod synthetic;
mod train;

pub use config::{parse_config, TrainConfig};
pub use dataset::{
    build_dataset, build_dataset_from_paths, DatasetParams, KeypointSelection, PatchDataset, PatchRecord, Split,
};
pub use synthetic::{generate_scene_with, generate_synthetic_scene, SceneKind, SceneParams, SyntheticScene};
pub use train::{lr_at, train, EpochCallback, LossLog, LossRow, TrainOutcome};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::network::NetworkError;
use crate::ppf::PpfError;

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("config line {line}: {reason}")]
    ConfigSyntax { line: usize, reason: String },
    #[error("no usable patches ({rejected} rejected)")]
    NoPatches { rejected: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("non-finite loss in epoch {epoch}, batch {batch} (patches {patches:?})")]
    NanLoss {
        epoch: usize,
        batch: usize,
        patches: Vec<usize>,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Ppf(#[from] PpfError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
