use histaxo_core::similarity::SimilarityError;

/// Failure reported by a backend for a single attempt.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    /// Worth retrying: timeouts, 429, 5xx.
    #[error("transient: {0}")]
    Transient(String),
    #[error("fatal: {0}")]
    Fatal(String),
    #[error("no fixture for template `{template}`: {detail}")]
    MissingFixture { template: String, detail: String },
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("provider `{provider}` unavailable after {attempts} attempt(s): {last}")]
    ProviderUnavailable {
        provider: String,
        attempts: u32,
        last: String,
    },
    #[error("template `{template}`: {detail}")]
    TemplateMissing { template: String, detail: String },
    #[error("malformed response to `{template}`: {reason}")]
    MalformedResponse { template: String, reason: String },
    #[error("no fixture for template `{template}`: {detail}")]
    MissingFixture { template: String, detail: String },
    #[error("embedding input is empty or contains a blank text")]
    EmptyInput,
    #[error("embedding of `{text}` has {got} dimensions, expected {expected}")]
    Dimension { text: String, got: usize, expected: usize },
    #[error("invalid fixture file {path}: {detail}")]
    Fixture { path: String, detail: String },
    #[error("no backend configured for provider `{0}`")]
    UnknownProvider(String),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl GatewayError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        GatewayError::Io {
            context: context.into(),
            source,
        }
    }
}
