//! OpenAI-compatible chat-completions wire format.

use serde::{Deserialize, Serialize};

use crate::config::EndpointConfig;
use crate::error::{GatewayError, Result};

const THINK_CLOSE: &str = "</think>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Serialize)]
struct TemplateKwargs {
    enable_thinking: bool,
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    top_p: f64,
    top_k: u32,
    min_p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    logprobs: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    chat_template_kwargs: Option<TemplateKwargs>,
}

/// Serializes a chat-completions request body.
pub fn chat_request_body(cfg: &EndpointConfig, messages: &[ChatMessage], want_logprobs: bool) -> String {
    let req = ChatRequest {
        model: &cfg.model_name,
        messages,
        temperature: cfg.temperature,
        top_p: cfg.top_p,
        top_k: cfg.top_k,
        min_p: cfg.min_p,
        max_tokens: cfg.max_tokens,
        logprobs: want_logprobs,
        chat_template_kwargs: cfg.enable_thinking.map(|enable_thinking| TemplateKwargs { enable_thinking }),
    };
    serde_json::to_string(&req).expect("request serializes")
}

#[derive(Debug, Deserialize)]
struct RawResponse {
    choices: Vec<RawChoice>,
    #[serde(default)]
    usage: Option<RawUsage>,
}

#[derive(Debug, Deserialize)]
struct RawChoice {
    message: RawMessage,
    #[serde(default)]
    logprobs: Option<RawLogprobs>,
}

#[derive(Debug, Deserialize)]
struct RawMessage {
    #[serde(default)]
    content: Option<String>,
    #[serde(default, alias = "reasoning")]
    reasoning_content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawLogprobs {
    #[serde(default)]
    content: Option<Vec<RawToken>>,
}

#[derive(Debug, Deserialize)]
struct RawToken {
    token: String,
    logprob: f64,
}

#[derive(Debug, Deserialize)]
struct RawUsage {
    #[serde(default)]
    completion_tokens: Option<u64>,
}

/// Where a completion's token count came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenSource {
    /// `usage.completion_tokens` reported by the endpoint.
    Usage,
    /// Length of the returned log-probability list.
    Logprobs,
    /// Whitespace word count; the endpoint reported neither.
    Estimated,
}

impl TokenSource {
    pub fn flag(self) -> &'static str {
        match self {
            TokenSource::Usage => "tokens:usage",
            TokenSource::Logprobs => "tokens:logprobs",
            TokenSource::Estimated => "tokens:estimated",
        }
    }
}

/// A decoded completion.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatOutput {
    /// Final answer with any reasoning segment removed.
    pub text: String,
    /// Log-probabilities of the final-answer tokens only.
    pub token_logprobs: Option<Vec<f64>>,
    /// Completion tokens including any reasoning.
    pub token_count: u64,
    pub token_source: TokenSource,
}

/// Decodes a chat-completions response body.
///
/// Reasoning delivered inline as `<think>…</think>` or in a separate
/// `reasoning_content` field is removed from the answer and from the
/// log-probabilities, but still counted in `token_count`.
pub fn decode_chat_response(body: &str, want_logprobs: bool) -> Result<ChatOutput> {
    let raw: RawResponse = serde_json::from_str(body).map_err(|e| GatewayError::Decode(e.to_string()))?;
    let usage = raw.usage.and_then(|u| u.completion_tokens);
    let choice = raw
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| GatewayError::Decode("response has no choices".into()))?;
    let content = choice.message.content.unwrap_or_default();
    let reasoning = choice.message.reasoning_content.unwrap_or_default();
    let tokens = choice.logprobs.and_then(|l| l.content).unwrap_or_default();

    if tokens.iter().any(|t| t.logprob.is_nan()) {
        return Err(GatewayError::Decode("NaN log-probability".into()));
    }
    let (text, answer_tokens) = match content.rfind(THINK_CLOSE) {
        Some(pos) => {
            let end = pos + THINK_CLOSE.len();
            (content[end..].trim().to_string(), tokens_after(&tokens, &content, end))
        }
        None => (content.trim().to_string(), &tokens[..]),
    };

    let token_logprobs = if want_logprobs {
        if answer_tokens.is_empty() {
            return Err(GatewayError::Capability(
                "endpoint returned no token log-probabilities; use verbalized scoring".into(),
            ));
        }
        Some(answer_tokens.iter().map(|t| t.logprob.min(0.0)).collect())
    } else {
        None
    };

    let (token_count, token_source) = match (usage, tokens.len()) {
        (Some(n), _) => (n, TokenSource::Usage),
        (None, n) if n > 0 => (n as u64, TokenSource::Logprobs),
        _ => (
            (reasoning.split_whitespace().count() + content.split_whitespace().count()) as u64,
            TokenSource::Estimated,
        ),
    };

    Ok(ChatOutput {
        text,
        token_logprobs,
        token_count,
        token_source,
    })
}

/// Tokens that start at or after byte offset `end` of `content`. Falls back
/// to the tokens after the last one holding the closing tag when the token
/// texts do not concatenate to the content.
fn tokens_after<'a>(tokens: &'a [RawToken], content: &str, end: usize) -> &'a [RawToken] {
    let joined: String = tokens.iter().map(|t| t.token.as_str()).collect();
    if joined == content {
        let mut offset = 0;
        for (i, t) in tokens.iter().enumerate() {
            if offset >= end {
                return &tokens[i..];
            }
            offset += t.token.len();
        }
        return &[];
    }
    match tokens.iter().rposition(|t| t.token.contains(THINK_CLOSE)) {
        Some(i) => &tokens[i + 1..],
        None => tokens,
    }
}

/// `exp` of each log-probability.
pub fn to_probabilities(logprobs: &[f64]) -> Vec<f64> {
    logprobs.iter().map(|lp| lp.exp()).collect()
}
