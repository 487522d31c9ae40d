//! Provider access for the taxonomy pipeline: role-routed chat requests
//! rendered from templates, cached embeddings, retries with backoff,
//! per-provider rate limits, a JSON-lines transcript, and a deterministic
//! mock provider for offline runs.

pub mod backend;
pub mod cache;
pub mod error;
mod gateway;
pub mod limiter;
pub mod live;
pub mod mock;
pub mod role;
pub mod template;
pub mod transcript;

pub use backend::{ChatBackend, EmbeddingBackend};
pub use error::{BackendError, GatewayError};
pub use gateway::{reprompt_suffix, EmbeddingVector, Gateway, RetryPolicy};
pub use histaxo_core::similarity::cosine as cosine_similarity;
pub use mock::MockProvider;
pub use role::{AgentRole, ChatCall, ProviderRequest, RequestKind, RoleName, Vars};
pub use template::TemplateSet;
pub use transcript::{TranscriptLog, TranscriptRecord};
