//! The HTTP client against a local chat-completions fixture.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use riva_core::agents::policy;
use riva_core::harness::{run_task, AgentKind, FaultCondition, RunSpec, Scenario};
use riva_core::llm::{BackendError, ChatBackend, ChatMessage, HttpBackend, HttpConfig};
use serde_json::{json, Value};

struct Request {
    headers: Vec<(String, String)>,
    body: Value,
}

type Responder = Box<dyn FnMut(&Value) -> (u16, String) + Send>;

/// Serves `responder` until the test ends; returns the base URL and the log
/// of received requests.
fn serve(mut responder: Responder) -> (String, Arc<Mutex<Vec<Request>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let log = Arc::new(Mutex::new(Vec::new()));
    let seen = log.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { break };
            let req = read_request(&stream);
            let (status, body) = responder(&req.body);
            seen.lock().unwrap().push(req);
            respond(stream, status, &body);
        }
    });
    (url, log)
}

fn read_request(stream: &TcpStream) -> Request {
    let mut reader = BufReader::new(stream);
    let mut headers = Vec::new();
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    loop {
        line.clear();
        reader.read_line(&mut line).unwrap();
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            headers.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
    }
    let len: usize = headers
        .iter()
        .find(|(k, _)| k == "content-length")
        .map(|(_, v)| v.parse().unwrap())
        .unwrap_or(0);
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    Request { headers, body: serde_json::from_slice(&body).unwrap_or(Value::Null) }
}

fn respond(mut stream: TcpStream, status: u16, body: &str) {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        429 => "Too Many Requests",
        _ => "Error",
    };
    let msg = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.write_all(msg.as_bytes());
}

fn completion(content: &str, usage: bool) -> String {
    let mut v = json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]});
    if usage {
        v["usage"] = json!({"prompt_tokens": 11, "completion_tokens": 3, "total_tokens": 14});
    }
    v.to_string()
}

fn config(url: &str) -> HttpConfig {
    let mut c = HttpConfig::new(url, "test-model");
    c.backoff_ms = 1;
    c.timeout_secs = 10;
    c
}

fn hello() -> Vec<ChatMessage> {
    vec![ChatMessage::system("be brief"), ChatMessage::user("hello")]
}

#[test]
fn reports_provider_usage_and_sends_the_bearer_token() {
    std::env::set_var("RIVA_FIXTURE_KEY", "sk-fixture");
    let (url, log) = serve(Box::new(|_| (200, completion("hi there", true))));
    let mut c = config(&url);
    c.api_key_env = Some("RIVA_FIXTURE_KEY".into());
    c.temperature = 0.3;
    let backend = HttpBackend::new(c).unwrap();
    let reply = backend.chat(&hello()).unwrap();
    assert_eq!(reply.text, "hi there");
    assert_eq!(reply.usage.total_tokens, 14);
    assert!(!reply.estimated);
    assert_eq!(backend.describe(), "http:test-model");
    assert_eq!(backend.temperature(), Some(0.3));

    let log = log.lock().unwrap();
    let req = &log[0];
    assert!(req.headers.iter().any(|(k, v)| k == "authorization" && v == "Bearer sk-fixture"));
    assert_eq!(req.body["model"], "test-model");
    assert_eq!(req.body["messages"][0]["role"], "system");
    assert_eq!(req.body["messages"][1]["content"], "hello");
    // The key never appears in anything the backend reports about itself.
    assert!(!format!("{backend:?}").contains("sk-fixture"));
}

#[test]
fn missing_usage_falls_back_to_an_estimate() {
    let (url, _) = serve(Box::new(|_| (200, completion("four", false))));
    let reply = HttpBackend::new(config(&url)).unwrap().chat(&hello()).unwrap();
    assert!(reply.estimated);
    assert_eq!(reply.usage.completion_tokens, 1);
}

#[test]
fn server_errors_are_retried() {
    let mut calls = 0;
    let (url, log) = serve(Box::new(move |_| {
        calls += 1;
        if calls < 3 {
            (503, "{}".into())
        } else {
            (200, completion("ok", true))
        }
    }));
    let reply = HttpBackend::new(config(&url)).unwrap().chat(&hello()).unwrap();
    assert_eq!(reply.text, "ok");
    assert_eq!(log.lock().unwrap().len(), 3);
}

#[test]
fn rate_limits_exhaust_the_retry_budget() {
    let (url, log) = serve(Box::new(|_| (429, "{}".into())));
    let err = HttpBackend::new(config(&url)).unwrap().chat(&hello()).unwrap_err();
    assert!(matches!(err, BackendError::BackendUnavailable(ref m) if m.contains("429")), "{err}");
    assert_eq!(log.lock().unwrap().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, log) = serve(Box::new(|_| (400, r#"{"error": "bad model"}"#.into())));
    let err = HttpBackend::new(config(&url)).unwrap().chat(&hello()).unwrap_err();
    assert!(matches!(err, BackendError::BackendUnavailable(ref m) if m.contains("bad model")), "{err}");
    assert_eq!(log.lock().unwrap().len(), 1);
}

#[test]
fn malformed_bodies_are_reported() {
    let (url, _) = serve(Box::new(|_| (200, "not json".into())));
    let err = HttpBackend::new(config(&url)).unwrap().chat(&hello()).unwrap_err();
    assert!(matches!(err, BackendError::MalformedProviderResponse(_)));
    let (url, _) = serve(Box::new(|_| (200, r#"{"choices": []}"#.into())));
    let err = HttpBackend::new(config(&url)).unwrap().chat(&hello()).unwrap_err();
    assert!(matches!(err, BackendError::MalformedProviderResponse(_)));
}

#[test]
fn requests_without_a_system_prompt_never_leave_the_process() {
    let (url, log) = serve(Box::new(|_| (200, completion("x", true))));
    let err = HttpBackend::new(config(&url)).unwrap().chat(&[ChatMessage::user("hi")]).unwrap_err();
    assert!(matches!(err, BackendError::InvalidRequest(_)));
    assert!(log.lock().unwrap().is_empty());
}

/// A server that answers like the reference policy drives a full run.
#[test]
fn full_run_over_http() {
    let (url, _) = serve(Box::new(|body| {
        let messages: Vec<ChatMessage> = serde_json::from_value(body["messages"].clone()).unwrap();
        (200, completion(&policy::respond(&messages), true))
    }));
    let scenario = Scenario::load(
        &std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus/scenarios/s3_checkout_errors.json"),
    )
    .unwrap();
    let backend = HttpBackend::new(config(&url)).unwrap();
    let run = RunSpec {
        agent: AgentKind::Riva { k: 2 },
        condition: FaultCondition::GetLogs,
        repetition: 0,
        seed: 3,
        max_steps: 45,
        record_exploratory: false,
    };
    let a = run_task(&scenario, &run, &backend).unwrap();
    assert!(a.report.success, "{:?}", a.report);
    assert!(!a.report.tokens_estimated);
    assert_eq!(a.report.total_tokens, 14 * a.report.steps as u64);
    assert_eq!(a.report.backend, "http:test-model");
}
