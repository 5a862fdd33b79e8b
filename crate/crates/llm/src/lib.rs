//! Headline prompts, a chat-completion HTTP client with retries and a
//! content-addressed response cache, and refusal detection.

pub mod cache;
pub mod client;
pub mod mock;
pub mod prompt;
pub mod refusal;

pub use cache::Cache;
pub use client::{Client, DecodingParams, EndpointConfig, GenerationRecord};
pub use prompt::{build_prompt, PromptSpec};
pub use refusal::{refusal_rate, RefusalDetector};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("empty headline")]
    EmptyHeadline,
    #[error("prompt kind `{0}` has no template")]
    NoTemplate(&'static str),
    #[error("endpoint {endpoint}: gave up after {attempts} attempts: {last}")]
    RetryExhausted {
        endpoint: String,
        attempts: u32,
        last: String,
    },
    #[error("endpoint {endpoint}: HTTP {status}: {body}")]
    Status {
        endpoint: String,
        status: u16,
        body: String,
    },
    #[error("endpoint {endpoint}: malformed response: {message}")]
    BadResponse { endpoint: String, message: String },
    #[error("cache {path}: {message}")]
    Cache { path: String, message: String },
    #[error(transparent)]
    Core(#[from] aigcbias::Error),
}

pub type Result<T, E = LlmError> = std::result::Result<T, E>;
