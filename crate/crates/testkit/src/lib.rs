//! Fixtures shared by the integration and acceptance suites: synthetic
//! scored records and a local stand-in for an OpenAI-compatible endpoint.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use pacroute_core::simulation::{rep_rng, Scenario};
use pacroute_core::{CalibrationRecord, ScoreKind};

/// Scored records drawn from a scenario; losses and expert answers are
/// attached when `labeled` is set.
pub fn synthetic_records(s: &Scenario, n: usize, seed: u64, labeled: bool) -> Vec<CalibrationRecord> {
    let mut rng = rep_rng(seed, 0);
    s.sample_items(&mut rng, n)
        .into_iter()
        .enumerate()
        .map(|(i, it)| {
            let mut r = CalibrationRecord::unlabeled(format!("item-{i}"), it.uncertainty, format!("cheap-{i}"), it.cheap_tokens);
            r.score_kind = Some(ScoreKind::Logits);
            r.expert_tokens = Some(it.expert_tokens);
            if labeled {
                r.expert_answer = Some(format!("expert-{i}"));
                r.loss = Some(it.loss);
            }
            r
        })
        .collect()
}

pub fn write_records(path: &Path, records: &[CalibrationRecord]) {
    std::fs::write(path, pacroute_gateway::to_jsonl(records)).unwrap();
}

/// Minimal OpenAI-compatible endpoint on a local port.
pub struct FakeEndpoint {
    pub url: String,
    pub requests: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    addr: std::net::SocketAddr,
    handle: Option<JoinHandle<()>>,
}

pub type Responder = dyn Fn(&serde_json::Value) -> (u16, String) + Send + Sync;

impl FakeEndpoint {
    pub fn start(respond: Box<Responder>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let stop = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(AtomicUsize::new(0));
        let (s, r) = (stop.clone(), requests.clone());
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if s.load(Ordering::SeqCst) {
                    break;
                }
                if let Ok(stream) = stream {
                    r.fetch_add(1, Ordering::SeqCst);
                    let _ = serve(stream, &*respond);
                }
            }
        });
        Self {
            url: format!("http://{addr}/v1"),
            requests,
            stop,
            addr,
            handle: Some(handle),
        }
    }

    /// Answers every chat request with `42`, with log-probabilities when
    /// asked, and every verbalized-confidence request with `reply`.
    pub fn chat(reply: &'static str) -> Self {
        Self::start(Box::new(move |body| {
            let verbalized = body["messages"][0]["content"]
                .as_str()
                .is_some_and(|c| c.starts_with("You are a reasoning assistant"));
            let content = if verbalized { reply } else { "42" };
            let mut resp = serde_json::json!({
                "choices": [{"message": {"content": content}}],
                "usage": {"completion_tokens": 2}
            });
            if body["logprobs"] == true {
                resp["choices"][0]["logprobs"] =
                    serde_json::json!({"content": [{"token": "4", "logprob": -0.1}, {"token": "2", "logprob": -0.3}]});
            }
            (200, resp.to_string())
        }))
    }

    pub fn config(&self, dir: &Path) -> PathBuf {
        let path = dir.join("endpoints.toml");
        let text = format!(
            "cache_dir = \"cache\"\n\n[nonthinking]\nbase_url = \"{u}\"\nmodel_name = \"cheap\"\nmax_retries = 0\n\n\
             [thinking]\nbase_url = \"{u}\"\nmodel_name = \"big\"\nmax_retries = 0\n",
            u = self.url
        );
        std::fs::write(&path, text).unwrap();
        path
    }
}

impl Drop for FakeEndpoint {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, respond: &Responder) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut content_length = 0;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            content_length = v.trim().parse().unwrap_or(0);
        }
        if line == "\r\n" {
            break;
        }
    }
    let mut payload = vec![0; content_length];
    reader.read_exact(&mut payload)?;
    let body: serde_json::Value = serde_json::from_slice(&payload).unwrap_or_default();
    let (status, text) = respond(&body);
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    )?;
    stream.flush()
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}
