//! The three construction stages (induce, expand, enrich), run
//! configuration, structural invariants, and evaluation of a finished
//! taxonomy.

pub mod config;
pub mod enricher;
pub mod evaluate;
pub mod expander;
pub mod inducer;
pub mod invariants;
pub mod reply;

use histaxo_core::ingest::IngestError;
use histaxo_core::metrics::MetricError;
use histaxo_core::similarity::SimilarityError;
use histaxo_core::TaxonomyError;
use histaxo_gateway::{GatewayError, Vars};

pub use config::{ProviderMode, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("chapter {0} has no text")]
    EmptyChapter(String),
    #[error("every extractor failed on {chapter}: {}", .errors.join("; "))]
    AllExtractorsFailed { chapter: String, errors: Vec<String> },
    #[error("{domain}: induction did not converge after {rounds} round(s), top level still has {width} nodes")]
    NonConvergence {
        domain: String,
        rounds: usize,
        width: usize,
    },
    #[error("{stage}: {} invariant violation(s): {}", .violations.len(), .violations.join("; "))]
    InvariantViolation { stage: String, violations: Vec<String> },
    #[error("configuration: {0}")]
    Config(String),
}

pub(crate) fn vars(pairs: &[(&str, &str)]) -> Vars {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}
