use std::time::Duration;

/// One POST of a JSON body.
#[derive(Debug, Clone, Copy)]
pub struct HttpRequest<'a> {
    pub url: &'a str,
    pub body: &'a str,
    pub api_key: Option<&'a str>,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportFailure {
    /// `None` for connection-level failures.
    pub status: Option<u16>,
    pub message: String,
}

impl TransportFailure {
    /// Network errors, 429 and 5xx are worth retrying; other statuses are not.
    pub fn retryable(&self) -> bool {
        match self.status {
            None => true,
            Some(429) => true,
            Some(s) => s >= 500,
        }
    }
}

pub trait Transport: Send + Sync {
    fn post(&self, req: &HttpRequest<'_>) -> Result<String, TransportFailure>;
}

/// Blocking HTTP transport.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl Default for HttpTransport {
    fn default() -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self { agent }
    }
}

impl Transport for HttpTransport {
    fn post(&self, req: &HttpRequest<'_>) -> Result<String, TransportFailure> {
        let mut builder = self
            .agent
            .post(req.url)
            .config()
            .timeout_global(Some(req.timeout))
            .build()
            .header("Content-Type", "application/json");
        if let Some(key) = req.api_key {
            builder = builder.header("Authorization", format!("Bearer {key}"));
        }
        let network = |e: ureq::Error| TransportFailure {
            status: None,
            message: e.to_string(),
        };
        let mut resp = builder.send(req.body).map_err(network)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(network)?;
        if (200..300).contains(&status) {
            Ok(text)
        } else {
            Err(TransportFailure {
                status: Some(status),
                message: text.chars().take(500).collect(),
            })
        }
    }
}
