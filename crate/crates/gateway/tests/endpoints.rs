use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use pacroute_core::{AnswerExtractor, CalibrationRecord, ScoreKind};
use pacroute_gateway::*;
use serde_json::json;

/// Replays scripted responses and records every request body.
#[derive(Default)]
struct Scripted {
    replies: Mutex<VecDeque<Result<String, TransportFailure>>>,
    bodies: Mutex<Vec<String>>,
    urls: Mutex<Vec<String>>,
}

impl Scripted {
    fn new(replies: Vec<Result<String, TransportFailure>>) -> Arc<Self> {
        Arc::new(Self {
            replies: Mutex::new(replies.into()),
            ..Default::default()
        })
    }

    fn calls(&self) -> usize {
        self.bodies.lock().unwrap().len()
    }
}

impl Transport for Scripted {
    fn post(&self, req: &HttpRequest<'_>) -> Result<String, TransportFailure> {
        self.bodies.lock().unwrap().push(req.body.to_string());
        self.urls.lock().unwrap().push(req.url.to_string());
        self.replies.lock().unwrap().pop_front().unwrap_or_else(|| {
            Err(TransportFailure {
                status: Some(599),
                message: "script exhausted".into(),
            })
        })
    }
}

fn chat(content: &str) -> Result<String, TransportFailure> {
    Ok(json!({"choices": [{"message": {"content": content}}], "usage": {"completion_tokens": 12}}).to_string())
}

fn chat_with_logprobs(tokens: &[(&str, f64)]) -> Result<String, TransportFailure> {
    let content: String = tokens.iter().map(|t| t.0).collect();
    let lp: Vec<_> = tokens.iter().map(|(t, l)| json!({"token": t, "logprob": l})).collect();
    Ok(json!({"choices": [{"message": {"content": content}, "logprobs": {"content": lp}}]}).to_string())
}

fn fail(status: Option<u16>, message: &str) -> Result<String, TransportFailure> {
    Err(TransportFailure {
        status,
        message: message.into(),
    })
}

fn cfg() -> EndpointConfig {
    let mut c = EndpointConfig::nonthinking("http://endpoint.test/v1/", "cheap-model");
    c.backoff_initial_ms = 0;
    c.backoff_cap_ms = 0;
    c.max_retries = 3;
    c
}

fn client(t: &Arc<Scripted>, cache: Option<DiskCache>) -> Client<Arc<Scripted>> {
    Client::with_transport(cfg(), t.clone(), cache).unwrap()
}

#[test]
fn repeated_request_is_served_from_cache_even_after_restart() {
    let dir = tempfile::tempdir().unwrap();
    let t = Scripted::new(vec![chat("42")]);
    let c = client(&t, Some(DiskCache::open(dir.path()).unwrap()));
    let first = c.complete("q", false).unwrap();
    let second = c.complete("q", false).unwrap();
    assert_eq!(first, second);
    assert_eq!(t.calls(), 1);
    assert_eq!(t.urls.lock().unwrap()[0], "http://endpoint.test/v1/chat/completions");

    let restarted = client(&t, Some(DiskCache::open(dir.path()).unwrap()));
    assert_eq!(restarted.complete("q", false).unwrap(), first);
    assert_eq!(t.calls(), 1);
    assert_eq!(restarted.network_requests(), 0);
}

#[test]
fn retryable_failures_back_off_then_succeed() {
    let t = Scripted::new(vec![fail(Some(503), "busy"), fail(None, "reset"), fail(Some(429), "slow"), chat("ok")]);
    let c = client(&t, None);
    assert_eq!(c.complete("q", false).unwrap().text, "ok");
    assert_eq!(c.network_requests(), 4);
}

#[test]
fn retries_are_capped_and_client_errors_are_not_retried() {
    let t = Scripted::new(vec![fail(Some(500), "x"); 10]);
    match client(&t, None).complete("q", false) {
        Err(GatewayError::Transport { status, attempts, .. }) => {
            assert_eq!(status, Some(500));
            assert_eq!(attempts, 4);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(t.calls(), 4);

    let t = Scripted::new(vec![fail(Some(401), "bad key")]);
    let err = client(&t, None).complete("q", false).unwrap_err();
    assert!(err.is_transport());
    assert_eq!(t.calls(), 1);
}

#[test]
fn logprob_rejection_becomes_capability_error() {
    let t = Scripted::new(vec![fail(Some(400), "logprobs are not supported by this model")]);
    assert!(matches!(client(&t, None).complete("q", true), Err(GatewayError::Capability(_))));
    let t = Scripted::new(vec![chat("no logprobs here")]);
    assert!(matches!(client(&t, None).complete("q", true), Err(GatewayError::Capability(_))));
}

#[test]
fn logits_scoring_turns_logprobs_into_uncertainty() {
    let t = Scripted::new(vec![chat_with_logprobs(&[("4", -0.2231), ("2", -0.2231), (".", -0.2231)])]);
    let input = InputRecord {
        id: "q1".into(),
        prompt: "6*7?".into(),
        gold: Some("42".into()),
    };
    let rec = score_input(&client(&t, None), &input, ScoreKind::Logits, 1).unwrap();
    assert!((rec.uncertainty - 0.2).abs() < 1e-4);
    assert_eq!(rec.cheap_answer, "42.");
    assert_eq!(rec.cheap_tokens, 3);
    assert_eq!(rec.score_kind, Some(ScoreKind::Logits));
    assert_eq!(rec.flags, vec!["tokens:logprobs"]);
    assert_eq!(rec.gold.as_deref(), Some("42"));
    let body: serde_json::Value = serde_json::from_str(&t.bodies.lock().unwrap()[0]).unwrap();
    assert_eq!(body["logprobs"], true);
}

#[test]
fn verbalized_prompt_matches_golden_bytes() {
    let golden = include_str!("golden/verbalized_messages.json");
    let messages = verbalized_messages("What is 2 + 2?", "4");
    assert_eq!(serde_json::to_string(&messages).unwrap(), golden);

    let t = Scripted::new(vec![chat("0.5")]);
    verbalized_confidence(&client(&t, None), "What is 2 + 2?", "4", 1).unwrap();
    let sent: serde_json::Value = serde_json::from_str(&t.bodies.lock().unwrap()[0]).unwrap();
    let want: serde_json::Value = serde_json::from_str(golden).unwrap();
    assert_eq!(sent["messages"], want);
    assert_eq!(sent["temperature"], 0.7);
}

#[test]
fn verbalized_trials_parse_flag_and_fail() {
    let t = Scripted::new(vec![chat("0.9"); 10]);
    let out = verbalized_confidence(&client(&t, None), "q", "a", DEFAULT_TRIALS).unwrap();
    assert_eq!(out.trials.confidences(), &[0.9; 10]);
    assert!(out.flags.is_empty());
    assert_eq!(t.calls(), 10);

    let t = Scripted::new(vec![chat("I think 0.8"), chat("0.6")]);
    let out = verbalized_confidence(&client(&t, None), "q", "a", 2).unwrap();
    assert_eq!(out.trials.confidences(), &[0.0, 0.6]);
    assert_eq!(out.flags, vec!["verbalized:unparseable:0"]);

    let t = Scripted::new(vec![fail(Some(404), "gone"), chat("0.7")]);
    let out = verbalized_confidence(&client(&t, None), "q", "a", 2).unwrap();
    assert_eq!(out.trials.confidences(), &[0.0, 0.7]);
    assert_eq!(out.flags, vec!["verbalized:failed:0"]);

    let t = Scripted::new(vec![fail(Some(404), "gone"), fail(Some(404), "gone")]);
    assert!(verbalized_confidence(&client(&t, None), "q", "a", 2).unwrap_err().is_transport());
    assert!(verbalized_confidence(&client(&t, None), "q", "a", 0).is_err());
}

#[test]
fn verbalized_trials_are_cached_separately() {
    let dir = tempfile::tempdir().unwrap();
    let t = Scripted::new(vec![chat("0.1"), chat("0.2"), chat("0.3")]);
    let c = client(&t, Some(DiskCache::open(dir.path()).unwrap()));
    let a = verbalized_confidence(&c, "q", "a", 3).unwrap();
    assert_eq!(a.trials.confidences(), &[0.1, 0.2, 0.3]);
    let b = verbalized_confidence(&c, "q", "a", 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(t.calls(), 3);
}

#[test]
fn labeler_computes_binary_and_semantic_losses() {
    let thinking_t = Scripted::new(vec![chat("<think>work</think>\\boxed{41}"), chat("\\boxed{42}")]);
    let thinking = Client::with_transport(EndpointConfig::thinking("http://t", "big"), thinking_t.clone(), None).unwrap();
    let labeler = Labeler {
        thinking: &thinking,
        embedding: None,
        kind: LossKind::Binary,
        extractor: AnswerExtractor::Boxed,
    };
    let mut rec = CalibrationRecord::unlabeled("r", 0.3, "\\boxed{42}", 5);
    rec.prompt = Some("6*7".into());
    rec.gold = Some("42".into());
    // expert wrong, cheap right: no loss
    let l = labeler.label(&rec).unwrap();
    assert_eq!((l.answer.as_str(), l.loss, l.tokens), ("\\boxed{41}", 0.0, Some(12)));
    rec.cheap_answer = "\\boxed{40}".into();
    assert_eq!(labeler.label(&rec).unwrap().loss, 1.0);
    rec.gold = None;
    assert!(matches!(labeler.label(&rec), Err(GatewayError::Config(_))));
    assert_eq!(thinking_t.calls(), 2);

    let emb = |v: [f64; 2]| Ok(json!({"data": [{"embedding": v}]}).to_string());
    let emb_t = Scripted::new(vec![emb([1.0, 0.0]), emb([0.0, 2.0])]);
    let embedding = Client::with_transport(cfg(), emb_t.clone(), None).unwrap();
    let semantic = Labeler {
        thinking: &thinking,
        embedding: Some(&embedding),
        kind: LossKind::Semantic,
        extractor: AnswerExtractor::Identity,
    };
    assert!((semantic.loss("cheap", "expert", None).unwrap() - 1.0).abs() < 1e-12);
    assert!(emb_t.urls.lock().unwrap()[0].ends_with("/embeddings"));
}

#[test]
fn parallel_map_bounds_in_flight_work() {
    let in_flight = AtomicUsize::new(0);
    let peak = AtomicUsize::new(0);
    let items: Vec<u32> = (0..40).collect();
    let out = parallel_map(&items, 3, |x| {
        let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        peak.fetch_max(now, Ordering::SeqCst);
        std::thread::sleep(std::time::Duration::from_millis(2));
        in_flight.fetch_sub(1, Ordering::SeqCst);
        x * 2
    });
    assert_eq!(out, items.iter().map(|x| x * 2).collect::<Vec<_>>());
    assert!(peak.load(Ordering::SeqCst) <= 3);
    assert!(parallel_map(&Vec::<u32>::new(), 3, |x| *x).is_empty());
}
