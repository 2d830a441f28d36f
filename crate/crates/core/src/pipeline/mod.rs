//! End-to-end orchestration: datasets, training, detection and evaluation.

pub mod bundle;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod detect;
pub mod metrics;
pub mod train;

use std::path::Path;

pub use bundle::TrainedModel;
pub use config::{LossNorm, TrainConfig};
pub use corpus::{gen_corpus, read_manifest, split_pairs, Family, ManifestEntry};
pub use dataset::{
    analyze_paths, analyze_source, read_jsonl, write_jsonl, AnalyzeOptions, AnalyzedFile,
    GraphRecord, NodeRecord,
};
pub use detect::{
    detect_sources, evaluate_scores, score_files, score_records, DetectReport, EvalReport,
    FileError, Finding, StatementScore, THRESHOLD,
};
pub use metrics::{evaluate, Metrics};
pub use train::{
    batches, graph_cross_entropy, prepare, train, train_embedder, train_graphs, PreparedGraph,
    TrainOutcome,
};

use crate::embedder::EmbedderError;
use crate::frontend::FrontendError;
use crate::fsgnn::FsgnnError;
use crate::persist::PersistError;
use crate::resampler::ResamplerError;
use crate::slicer::SlicerError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("write failed: {0}")]
    Write(std::io::Error),
    #[error("{file}: {source}")]
    Frontend { file: String, source: FrontendError },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid graph data: {0}")]
    Data(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("nothing to learn: no vulnerable nodes in the dataset")]
    NothingToLearn,
    #[error("empty input")]
    EmptyInput,
    #[error("malformed model bundle: {0}")]
    Bundle(String),
    #[error(transparent)]
    Embedder(#[from] EmbedderError),
    #[error(transparent)]
    Fsgnn(#[from] FsgnnError),
    #[error(transparent)]
    Resampler(#[from] ResamplerError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error(transparent)]
    Slicer(#[from] SlicerError),
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
