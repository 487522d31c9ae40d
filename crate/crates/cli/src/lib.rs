//! The `histaxo` command: checkpointed runs of the taxonomy pipeline and
//! metric reports.

pub mod args;
pub mod commands;
pub mod rundir;

use std::path::PathBuf;

use histaxo_core::ingest::IngestError;
use histaxo_core::TaxonomyError;
use histaxo_pipeline::PipelineError;
use serde::Serialize;

pub use args::Cli;
pub use commands::run;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("run directory {0} already exists and is not empty")]
    RunDirExists(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl From<TaxonomyError> for CliError {
    fn from(e: TaxonomyError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl From<histaxo_gateway::GatewayError> for CliError {
    fn from(e: histaxo_gateway::GatewayError) -> Self {
        CliError::Pipeline(e.into())
    }
}

/// Machine-readable failure, written as `error.json`.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}

impl From<&CliError> for ErrorReport {
    fn from(e: &CliError) -> Self {
        let mut report = ErrorReport {
            error: "",
            message: e.to_string(),
            stage: None,
            violations: Vec::new(),
        };
        report.error = match e {
            CliError::Usage(_) => "usage",
            CliError::RunDirExists(_) => "run_dir_exists",
            CliError::Io { .. } => "io",
            CliError::Pipeline(p) => match p {
                PipelineError::Gateway(_) => "gateway",
                PipelineError::Taxonomy(_) => "taxonomy",
                PipelineError::Ingest(_) => "ingest",
                PipelineError::Metric(_) => "metric",
                PipelineError::Similarity(_) => "similarity",
                PipelineError::EmptyChapter(_) => "empty_chapter",
                PipelineError::AllExtractorsFailed { .. } => "all_extractors_failed",
                PipelineError::NonConvergence { .. } => "non_convergence",
                PipelineError::Config(_) => "config",
                PipelineError::InvariantViolation { stage, violations } => {
                    report.stage = Some(stage.clone());
                    report.violations.clone_from(violations);
                    "invariant_violation"
                }
            },
        };
        report
    }
}
