//! Chat-completions client against a local one-shot HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use ssra::corpus::assemble_document;
use ssra::modelio::prompt::defaults;
use ssra::modelio::{judge_order, ChatBackend, Slot, SlotValues};
use ssra::modelio::{score, EndpointConfig, HttpChatBackend, LlmJudge, LlmScorer, ModelError, ModelRole, OrderVerdict, PromptedModel, RetryPolicy};
use ssra::{Query, RelevanceLabel};

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    authorization: Option<String>,
    body: serde_json::Value,
}

/// Serves `replies` (status, body) in order, one per connection.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut length = 0usize;
            let mut authorization = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => length = value.trim().parse().unwrap(),
                    "authorization" => authorization = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            let mut payload = vec![0; length];
            reader.read_exact(&mut payload).unwrap();
            log.lock().unwrap().push(Seen {
                path: request_line.split_whitespace().nth(1).unwrap().to_string(),
                authorization,
                body: serde_json::from_slice(&payload).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn reply(content: &str) -> (u16, String) {
    (
        200,
        serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string(),
    )
}

fn config(url: &str, role: ModelRole) -> EndpointConfig {
    let mut c = EndpointConfig::new(url, "test-model", role);
    c.retry = RetryPolicy::no_backoff(3);
    c.timeout_ms = 5_000;
    c.api_key = Some("secret".into());
    c
}

fn doc() -> ssra::Document {
    assemble_document("v1", "cat piano", Some("a cat"), Some("plays piano"), None).unwrap()
}

#[test]
fn scorer_retries_server_errors_and_bad_replies() {
    let (url, seen) = serve(vec![(500, "{}".into()), reply("no label here"), reply("It is about a cat.\nlabel: 2")]);
    let cfg = config(&url, ModelRole::Score);
    let backend = Arc::new(HttpChatBackend::new(&cfg).unwrap());
    let scorer = LlmScorer(PromptedModel::new(backend, defaults::score(), &cfg));
    let judgment = score(&scorer, &Query::new("q1", "cat playing piano").unwrap(), &doc()).unwrap();
    assert_eq!(judgment.label, RelevanceLabel::TWO);
    assert_eq!(judgment.rationale.as_deref(), Some("It is about a cat."));

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    for s in seen.iter() {
        assert_eq!(s.path, "/v1/chat/completions");
        assert_eq!(s.authorization.as_deref(), Some("Bearer secret"));
        assert_eq!(s.body["model"], "test-model");
        assert_eq!(s.body["temperature"], 0.0);
        let prompt = s.body["messages"][0]["content"].as_str().unwrap();
        assert!(prompt.contains("cat playing piano") && prompt.contains("cat piano"), "{prompt}");
    }
}

#[test]
fn judge_parses_order_reply() {
    let (url, _) = serve(vec![reply("order: B")]);
    let cfg = config(&url, ModelRole::Judge);
    let judge = LlmJudge(PromptedModel::new(Arc::new(HttpChatBackend::new(&cfg).unwrap()), defaults::judge(), &cfg));
    let verdict = judge_order(&judge, &doc(), &Query::new("a", "dog").unwrap(), &Query::new("b", "cat piano").unwrap()).unwrap();
    assert_eq!(verdict, OrderVerdict::BMoreRelevant);
}

#[test]
fn exhausted_retries_surface_the_last_error() {
    let (url, seen) = serve(vec![reply("nope"), reply("still nope")]);
    let mut cfg = config(&url, ModelRole::Score);
    cfg.retry = RetryPolicy::no_backoff(2);
    let scorer = LlmScorer(PromptedModel::new(Arc::new(HttpChatBackend::new(&cfg).unwrap()), defaults::score(), &cfg));
    let err = score(&scorer, &Query::new("q", "x").unwrap(), &doc()).unwrap_err();
    assert!(matches!(err, ModelError::ScoreParse { ref raw } if raw == "still nope"), "{err:?}");
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn unreachable_endpoint_is_an_endpoint_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let cfg = config(&format!("http://127.0.0.1:{port}"), ModelRole::Score);
    let backend = HttpChatBackend::new(&cfg).unwrap();
    let request = PromptedModel::new(Arc::new(HttpChatBackend::new(&cfg).unwrap()), defaults::score(), &cfg)
        .request(&SlotValues::from([(Slot::Query, "x"), (Slot::Title, "t"), (Slot::Body, "b")]))
        .unwrap();
    assert!(matches!(backend.complete(&request), Err(ModelError::Endpoint(_))));
}

#[test]
fn invalid_endpoint_config_is_rejected() {
    let mut cfg = EndpointConfig::new("ftp://x", "m", ModelRole::Score);
    assert!(matches!(HttpChatBackend::new(&cfg), Err(ModelError::Config(_))));
    cfg.base_url = "http://x".into();
    cfg.model_name.clear();
    assert!(matches!(HttpChatBackend::new(&cfg), Err(ModelError::Config(_))));
}
