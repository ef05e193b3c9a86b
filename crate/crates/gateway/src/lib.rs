//! Everything that talks to the outside world: OpenAI-compatible endpoints
//! for the nonthinking, thinking and embedding models, the response cache,
//! verbalized-confidence prompting, and JSONL dataset files.

pub mod cache;
pub mod client;
pub mod config;
pub mod dataset;
pub mod error;
pub mod labeler;
pub mod scoring;
pub mod transport;
pub mod verbalized;
pub mod wire;

pub use cache::{cache_key, DiskCache};
pub use client::{decode_embedding_response, parallel_map, CachedCompletion, Client};
pub use config::{EndpointConfig, GatewayConfig, Role};
pub use dataset::{
    ingest_dataset, parse_input_jsonl, parse_jsonl, parse_records_jsonl, read_decisions, read_input,
    read_records, split_dataset, to_jsonl, write_atomic, write_jsonl, InputRecord, SplitSpec,
};
pub use error::{GatewayError, Result};
pub use labeler::{Labeler, LossKind};
pub use scoring::{score_all, score_input};
pub use transport::{HttpRequest, HttpTransport, Transport, TransportFailure};
pub use verbalized::{
    parse_confidence, verbalized_confidence, verbalized_messages, VerbalizedOutcome, DEFAULT_TRIALS,
    VERBALIZED_SYSTEM_PROMPT,
};
pub use wire::{chat_request_body, decode_chat_response, ChatMessage, ChatOutput, TokenSource};
