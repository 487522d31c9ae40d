use crate::error::BackendError;
use crate::role::ChatCall;

/// A chat-completion endpoint. One call is one attempt; retries are the
/// gateway's job.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String, BackendError>;

    /// Requests per minute this backend tolerates; `None` is unlimited.
    fn requests_per_minute(&self) -> Option<u32> {
        None
    }

    /// Whether responses may vary run to run. Live backends record latency.
    fn is_live(&self) -> bool {
        false
    }
}

pub trait EmbeddingBackend: Send + Sync {
    /// One vector per text, in order.
    fn embed(&self, model: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError>;

    fn dimension(&self) -> Option<usize> {
        None
    }

    fn is_live(&self) -> bool {
        false
    }
}
