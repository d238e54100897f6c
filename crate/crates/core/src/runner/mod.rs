//! Training loop, evaluation, ablation, persistence and the command line.

mod ablate;
pub mod cli;
mod checkpoint;
mod config;
mod model;
mod train;

pub use ablate::{ablate, leave_one_out_rows, parse_row, row_name, AblationReport, AblationRow, SeedRun, Term};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{DataSource, EvalSpace, RunConfig};
pub use model::{l2_normalize, BatchVars, BoundModel, Inference, Model, ModelDims, PARTS};
pub use train::{
    binarization, evaluate, evaluate_model, extract_tree, kmeans_baseline, load_data, prepare,
    batch_objective, summary_csv, supervision, train, train_on, BatchObjective, EpochRecord, EvalReport, Manifest, RunResult,
    TreeSummary, CHECKPOINT_FILE, CONFIG_FILE, MANIFEST_FILE, METRICS_FILE, RESULT_FILE,
    SUMMARY_FILE, TREE_FILE,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::cluster::ClusterError;
use crate::datagen::DataError;
use crate::diffcore::DiffError;
use crate::losses::LossError;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("model takes {model} input features but the data has {data}")]
    Dimension { model: usize, data: usize },
    #[error("loss term {term} became non-finite in epoch {epoch}; last good checkpoint: {last_good:?}")]
    NonFinite {
        epoch: usize,
        term: String,
        last_good: Option<PathBuf>,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Diff(#[from] DiffError),
}
