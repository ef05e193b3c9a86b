use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cache::{cache_key, DiskCache};
use crate::config::EndpointConfig;
use crate::error::{GatewayError, Result};
use crate::transport::{HttpRequest, HttpTransport, Transport, TransportFailure};
use crate::wire::{chat_request_body, decode_chat_response, to_probabilities, ChatMessage, TokenSource};

/// A completion as stored in the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedCompletion {
    pub cache_key: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<f64>>,
    pub token_count: u64,
    pub token_source: TokenSource,
    /// Unix seconds when the completion was fetched.
    pub created_at: u64,
}

impl CachedCompletion {
    /// Per-token probabilities of the answer, when log-probabilities were requested.
    pub fn probabilities(&self) -> Option<Vec<f64>> {
        self.token_logprobs.as_deref().map(to_probabilities)
    }
}

#[derive(Serialize)]
struct ChatKey<'a> {
    kind: &'static str,
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    top_p: f64,
    top_k: u32,
    min_p: f64,
    max_tokens: Option<u32>,
    enable_thinking: Option<bool>,
    want_logprobs: bool,
    sample: u32,
}

#[derive(Serialize)]
struct EmbedKey<'a> {
    kind: &'static str,
    model: &'a str,
    input: &'a str,
}

#[derive(Serialize, Deserialize)]
struct CachedEmbedding {
    embedding: Vec<f64>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

/// Decodes an `/embeddings` response into its first vector.
pub fn decode_embedding_response(body: &str) -> Result<Vec<f64>> {
    let resp: EmbeddingResponse = serde_json::from_str(body).map_err(|e| GatewayError::Decode(e.to_string()))?;
    let v = resp
        .data
        .into_iter()
        .next()
        .ok_or_else(|| GatewayError::Decode("embedding response has no data".into()))?
        .embedding;
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return Err(GatewayError::Decode("embedding is empty or non-finite".into()));
    }
    Ok(v)
}

/// Client for one endpoint: retries, caching and request accounting.
pub struct Client<T = HttpTransport> {
    cfg: EndpointConfig,
    transport: T,
    cache: Option<DiskCache>,
    api_key: Option<String>,
    requests: AtomicU64,
}

impl Client<HttpTransport> {
    pub fn connect(cfg: EndpointConfig, cache: Option<DiskCache>) -> Result<Self> {
        Self::with_transport(cfg, HttpTransport::default(), cache)
    }
}

impl<T: Transport> Client<T> {
    pub fn with_transport(cfg: EndpointConfig, transport: T, cache: Option<DiskCache>) -> Result<Self> {
        cfg.validate()?;
        let api_key = cfg.api_key()?;
        Ok(Self {
            cfg,
            transport,
            cache,
            api_key,
            requests: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    /// HTTP requests issued so far, retries included.
    pub fn network_requests(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    fn post(&self, path: &str, body: &str) -> Result<String> {
        let url = format!("{}/{}", self.cfg.base_url.trim_end_matches('/'), path);
        let req = HttpRequest {
            url: &url,
            body,
            api_key: self.api_key.as_deref(),
            timeout: self.cfg.timeout(),
        };
        let mut attempt = 0;
        loop {
            self.requests.fetch_add(1, Ordering::SeqCst);
            match self.transport.post(&req) {
                Ok(text) => return Ok(text),
                Err(f) if f.retryable() && attempt < self.cfg.max_retries => {
                    let wait = self.cfg.backoff(attempt);
                    log::warn!("{url}: {} (retrying in {wait:?})", describe(&f));
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                Err(f) => {
                    return Err(GatewayError::Transport {
                        status: f.status,
                        message: f.message,
                        attempts: attempt + 1,
                    })
                }
            }
        }
    }

    /// Chat completion of `messages`. `sample` distinguishes repeated
    /// stochastic draws of the same request in the cache.
    pub fn complete_messages(&self, messages: &[ChatMessage], want_logprobs: bool, sample: u32) -> Result<CachedCompletion> {
        let key = cache_key(&ChatKey {
            kind: "chat",
            model: &self.cfg.model_name,
            messages,
            temperature: self.cfg.temperature,
            top_p: self.cfg.top_p,
            top_k: self.cfg.top_k,
            min_p: self.cfg.min_p,
            max_tokens: self.cfg.max_tokens,
            enable_thinking: self.cfg.enable_thinking,
            want_logprobs,
            sample,
        });
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get::<CachedCompletion>(&key)? {
                return Ok(hit);
            }
        }
        let body = chat_request_body(&self.cfg, messages, want_logprobs);
        let text = self.post("chat/completions", &body).map_err(|e| match e {
            GatewayError::Transport {
                status: Some(400 | 422),
                ref message,
                ..
            } if want_logprobs && message.to_ascii_lowercase().contains("logprob") => GatewayError::Capability(format!(
                "endpoint rejected the log-probability request ({message}); use verbalized scoring"
            )),
            other => other,
        })?;
        let out = decode_chat_response(&text, want_logprobs)?;
        let completion = CachedCompletion {
            cache_key: key.clone(),
            text: out.text,
            token_logprobs: out.token_logprobs,
            token_count: out.token_count,
            token_source: out.token_source,
            created_at: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        if let Some(cache) = &self.cache {
            cache.put(&key, &completion)?;
        }
        Ok(completion)
    }

    /// Single-turn completion of `prompt`.
    pub fn complete(&self, prompt: &str, want_logprobs: bool) -> Result<CachedCompletion> {
        self.complete_messages(&[ChatMessage::user(prompt)], want_logprobs, 0)
    }

    pub fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let key = cache_key(&EmbedKey {
            kind: "embedding",
            model: &self.cfg.model_name,
            input: text,
        });
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get::<CachedEmbedding>(&key)? {
                return Ok(hit.embedding);
            }
        }
        let body = serde_json::json!({"model": self.cfg.model_name, "input": text}).to_string();
        let embedding = decode_embedding_response(&self.post("embeddings", &body)?)?;
        if let Some(cache) = &self.cache {
            cache.put(&key, &CachedEmbedding { embedding: embedding.clone() })?;
        }
        Ok(embedding)
    }
}

impl<T: Transport> Transport for Arc<T> {
    fn post(&self, req: &HttpRequest<'_>) -> Result<String, TransportFailure> {
        (**self).post(req)
    }
}

fn describe(f: &TransportFailure) -> String {
    match f.status {
        Some(s) => format!("HTTP {s}: {}", f.message),
        None => f.message.clone(),
    }
}

/// Applies `f` to every item with at most `max_parallel` calls in flight,
/// returning results in input order.
pub fn parallel_map<I, O, F>(items: &[I], max_parallel: usize, f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync,
{
    let workers = max_parallel.max(1).min(items.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<O>> = (0..items.len()).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let out = f(&items[i]);
                results.lock().expect("results lock")[i] = Some(out);
            });
        }
    });
    slots.into_iter().map(|o| o.expect("every slot filled")).collect()
}
