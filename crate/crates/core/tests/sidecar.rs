//! Sidecar client against an in-process HTTP stub.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use sentipipe::embedding::{Provider, ProviderKind, SidecarClient, SidecarOptions, EmbeddingProviderSpec, EmbedInput};
use sentipipe::Error;

struct Request {
    method: String,
    path: String,
    body: Value,
}

/// Serves until the test ends. `handler` gets the request number (from 0)
/// and returns a status code and JSON body.
fn stub(handler: impl Fn(usize, &Request) -> (u16, Value) + Send + Sync + 'static) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let count = Arc::new(AtomicUsize::new(0));
    let seen = Arc::clone(&count);
    let handler = Arc::new(handler);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let handler = Arc::clone(&handler);
            let n = seen.fetch_add(1, Ordering::SeqCst);
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let mut parts = line.split_whitespace();
                let (method, path) = (parts.next().unwrap_or("").to_owned(), parts.next().unwrap_or("").to_owned());
                let mut length = 0;
                loop {
                    let mut header = String::new();
                    reader.read_line(&mut header).unwrap();
                    if header.trim().is_empty() {
                        break;
                    }
                    if let Some((k, v)) = header.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            length = v.trim().parse().unwrap();
                        }
                    }
                }
                let mut body = vec![0; length];
                reader.read_exact(&mut body).unwrap();
                let body = serde_json::from_slice(&body).unwrap_or(Value::Null);
                let (status, reply) = handler(n, &Request { method, path, body });
                let reply = reply.to_string();
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                );
            });
        }
    });
    (url, count)
}

/// Deterministic vector of width `dim` derived from the text.
fn fake_vector(text: &str, dim: usize) -> Vec<f64> {
    (0..dim).map(|i| ((text.len() * 31 + i) % 17) as f64 / 17.0).collect()
}

fn embed_handler(dim: usize) -> impl Fn(usize, &Request) -> (u16, Value) + Send + Sync + 'static {
    move |_, req| {
        assert_eq!((req.method.as_str(), req.path.as_str()), ("POST", "/embed"));
        let texts: Vec<String> = serde_json::from_value(req.body["texts"].clone()).unwrap();
        let vectors: Vec<Vec<f64>> = texts.iter().map(|t| fake_vector(t, dim)).collect();
        (200, json!({"model": req.body["model"], "dim": dim, "vectors": vectors}))
    }
}

fn quick() -> SidecarOptions {
    SidecarOptions {
        batch_size: 2,
        max_in_flight: 3,
        max_attempts: 3,
        timeout: Duration::from_secs(5),
        retry_backoff: Duration::from_millis(5),
    }
}

#[test]
fn health_reports_loaded_models() {
    let (url, _) = stub(|_, req| {
        assert_eq!((req.method.as_str(), req.path.as_str()), ("GET", "/health"));
        (200, json!({"status": "ok", "models": ["sbert", "biobert"]}))
    });
    let client = SidecarClient::new(format!("{url}/"), ProviderKind::Sbert, 4, quick());
    let health = client.health().unwrap();
    assert_eq!(health.status, "ok");
    assert_eq!(health.models, ["sbert", "biobert"]);
}

#[test]
fn batches_keep_input_order() {
    let (url, count) = stub(embed_handler(4));
    let texts = ["a", "bb", "ccc", "dddd", "eeeee"];
    let client = SidecarClient::new(url, ProviderKind::Biobert, 4, quick());
    let m = client.embed(&texts).unwrap();
    assert_eq!(m.dim(), (5, 4));
    for (row, text) in m.rows().into_iter().zip(texts) {
        assert_eq!(row.to_vec(), fake_vector(text, 4));
    }
    assert_eq!(count.load(Ordering::SeqCst), 3, "5 texts in batches of 2");
}

#[test]
fn transient_failures_are_retried() {
    let inner = embed_handler(3);
    let (url, count) = stub(move |n, req| if n < 2 { (503, json!({"error": "warming up"})) } else { inner(n, req) });
    let client = SidecarClient::new(url, ProviderKind::Bert, 3, SidecarOptions { max_in_flight: 1, ..quick() });
    let m = client.embed(&["one"]).unwrap();
    assert_eq!(m.row(0).to_vec(), fake_vector("one", 3));
    assert_eq!(count.load(Ordering::SeqCst), 3);
}

#[test]
fn persistent_failure_is_a_transport_error() {
    let (url, count) = stub(|_, _| (500, json!({"error": "down"})));
    let client = SidecarClient::new(url, ProviderKind::Scibert, 3, quick());
    let err = client.embed(&["x"]).unwrap_err();
    assert!(matches!(err, Error::Transport { attempts: 3, .. }), "{err}");
    assert_eq!(err.exit_code(), 5);
    assert_eq!(count.load(Ordering::SeqCst), 3);
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    // Bind and drop to find a port with nothing listening.
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let client = SidecarClient::new(format!("http://127.0.0.1:{port}"), ProviderKind::Sbert, 3, quick());
    assert_eq!(client.health().unwrap_err().exit_code(), 5);
}

#[test]
fn dimension_mismatch_is_not_retried() {
    let (url, count) = stub(embed_handler(5));
    let client = SidecarClient::new(url, ProviderKind::Sbert, 4, SidecarOptions { max_in_flight: 1, ..quick() });
    let err = client.embed(&["x"]).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
    assert_eq!(count.load(Ordering::SeqCst), 1);
}

#[test]
fn wrong_vector_count_is_a_format_error() {
    let (url, _) = stub(|_, _| (200, json!({"model": "sbert", "dim": 2, "vectors": [[0.0, 1.0]]})));
    let client = SidecarClient::new(url, ProviderKind::Sbert, 2, quick());
    assert_eq!(client.embed(&["a", "b"]).unwrap_err().exit_code(), 3);
}

#[test]
fn remote_provider_rounds_to_f32() {
    let (url, _) = stub(embed_handler(4));
    let spec = EmbeddingProviderSpec::remote(ProviderKind::Sbert, 4, url);
    let provider = Provider::from_spec(&spec).unwrap();
    let inputs = [EmbedInput { id: "r1", text: "fine" }];
    let m = provider.embed(&inputs).unwrap();
    assert!(m.iter().all(|v| *v == *v as f32 as f64));
}
