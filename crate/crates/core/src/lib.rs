//! Core data model and pure computations for building and evaluating
//! hierarchical event taxonomies.
//!
//! Nothing in this crate talks to a model provider: metrics and dedup work
//! over embedding vectors supplied by the caller.

pub mod domain;
pub mod editlog;
pub mod ingest;
pub mod kendall;
pub mod metrics;
pub mod report;
pub mod similarity;
pub mod taxonomy;

pub use domain::{Domain, DomainSpec};
pub use taxonomy::{NodeId, Parent, Provenance, RootMode, StructuralStats, Taxonomy, TaxonomyError, TaxonomyNode};

/// Similarity threshold used for every duplicate, coverage and match decision
/// unless configured otherwise.
pub const DEFAULT_THRESHOLD: f64 = 0.6;

/// Event types must occur strictly more often than this to become frequency
/// candidates.
pub const DEFAULT_FREQUENCY_THRESHOLD: usize = 5;
