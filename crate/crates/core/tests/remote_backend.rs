mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use tpl_bench::ablation::{run_experiment, ExperimentConfig, RunOptions, RunStatus, SessionStatus};
use tpl_bench::backend::{
    build_backend, BackendConfig, BackendError, Session, MAVEN_LIST_HEADER,
};
use tpl_bench::corpus::{PopularityTable, ProjectRecord};
use tpl_bench::prompting::PromptStrategy;

struct Request {
    headers: Vec<String>,
    body: serde_json::Value,
}

/// Serves scripted responses, one per connection; the last one repeats.
struct MockServer {
    url: String,
    requests: Arc<Mutex<Vec<Request>>>,
}

fn read_request(stream: &mut TcpStream) -> Option<Request> {
    let mut reader = BufReader::new(stream);
    let mut headers = Vec::new();
    let mut len = 0;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        let line = line.trim_end().to_string();
        if line.is_empty() {
            break;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            len = v.trim().parse().ok()?;
        }
        headers.push(line);
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).ok()?;
    Some(Request {
        headers,
        body: serde_json::from_slice(&body).ok()?,
    })
}

impl MockServer {
    fn start(script: Vec<(u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&requests);
        thread::spawn(move || {
            for (i, stream) in listener.incoming().enumerate() {
                let Ok(mut stream) = stream else { continue };
                let Some(req) = read_request(&mut stream) else { continue };
                log.lock().unwrap().push(req);
                let (status, body) = &script[i.min(script.len() - 1)];
                let resp = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(resp.as_bytes());
            }
        });
        MockServer { url, requests }
    }

    fn hits(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

fn chat_reply(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn config(url: &str) -> BackendConfig {
    BackendConfig {
        retry_base_delay_ms: 1,
        request_timeout_secs: 5.0,
        ..BackendConfig::remote(url, "llama-test")
    }
}

fn complete(cfg: &BackendConfig) -> Result<String, BackendError> {
    let backend = build_backend(cfg, &[], &PopularityTable::default()).unwrap();
    let target = ProjectRecord::new("t", []);
    backend.complete(&Session {
        prompt: "recommend please",
        target: &target,
        n: 10,
    })
}

#[test]
fn sends_chat_request_and_returns_content() {
    let reply = format!("{MAVEN_LIST_HEADER}\n\n1: junit:junit");
    let server = MockServer::start(vec![(200, chat_reply(&reply))]);
    let cfg = BackendConfig {
        api_key: Some("s3cret".into()),
        ..config(&server.url)
    };
    assert_eq!(complete(&cfg).unwrap(), reply);
    let reqs = server.requests.lock().unwrap();
    let req = &reqs[0];
    assert_eq!(req.body["model"], "llama-test");
    assert_eq!(req.body["temperature"], 0.0);
    assert_eq!(req.body["messages"][0]["content"], "recommend please");
    assert!(req.headers[0].starts_with("POST /v1/chat/completions"));
    assert!(req
        .headers
        .iter()
        .any(|h| h.eq_ignore_ascii_case("authorization: Bearer s3cret")));
}

#[test]
fn finetuned_flag_switches_model_name() {
    let server = MockServer::start(vec![(200, chat_reply("x"))]);
    let cfg = BackendConfig {
        use_finetuned: true,
        ..config(&server.url)
    };
    complete(&cfg).unwrap();
    assert_eq!(server.requests.lock().unwrap()[0].body["model"], "llama-test-finetuned");
}

#[test]
fn rate_limit_is_retried() {
    let server = MockServer::start(vec![
        (429, "{}".into()),
        (503, "{}".into()),
        (200, chat_reply("ok")),
    ]);
    assert_eq!(complete(&config(&server.url)).unwrap(), "ok");
    assert_eq!(server.hits(), 3);
}

#[test]
fn retries_are_bounded() {
    let server = MockServer::start(vec![(500, "{}".into())]);
    let cfg = BackendConfig {
        max_retries: 2,
        ..config(&server.url)
    };
    match complete(&cfg) {
        Err(BackendError::Exhausted { attempts, status, .. }) => {
            assert_eq!(attempts, 3);
            assert_eq!(status, Some(500));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(server.hits(), 3);
}

#[test]
fn client_errors_fail_fast() {
    let server = MockServer::start(vec![(400, "{\"error\":\"bad\"}".into())]);
    assert!(matches!(
        complete(&config(&server.url)),
        Err(BackendError::Permanent { status: Some(400), .. })
    ));
    assert_eq!(server.hits(), 1);
}

#[test]
fn unreachable_endpoint_is_a_backend_error() {
    // bind then drop to get a port with nothing listening
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let cfg = BackendConfig {
        max_retries: 0,
        ..config(&format!("http://127.0.0.1:{port}"))
    };
    assert!(matches!(complete(&cfg), Err(BackendError::Exhausted { attempts: 1, .. })));
}

#[test]
fn run_with_dead_backend_is_marked_failed_but_reports() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let backend = BackendConfig {
        max_retries: 0,
        ..config(&format!("http://127.0.0.1:{port}"))
    };
    let cfg = ExperimentConfig::new("dead", backend, PromptStrategy::zero_shot());
    let r = run_experiment(&cfg, &common::long_tail_corpus(), &RunOptions::default()).unwrap();
    assert_eq!(r.status, RunStatus::Failed);
    assert_eq!(r.sessions_failed, r.sessions_total);
    assert_eq!(r.report.precision, 0.0);
    assert_eq!(r.report.per_project.len(), r.sessions_total);
    assert!(r
        .sessions
        .iter()
        .all(|s| matches!(s.status, SessionStatus::BackendFailed(_))));
}

#[test]
fn remote_run_parses_replies() {
    let reply = format!("{MAVEN_LIST_HEADER}\n\n1: org.niche0:toolkit-0\n2: `junit:junit`\n3: not a coordinate");
    let server = MockServer::start(vec![(200, chat_reply(&reply))]);
    let cfg = ExperimentConfig::new("remote", config(&server.url), PromptStrategy::few_shot(2));
    let r = run_experiment(&cfg, &common::long_tail_corpus(), &RunOptions::default()).unwrap();
    assert_eq!(r.status, RunStatus::Completed);
    assert_eq!(r.sessions_failed, 0);
    assert!(r.sessions.iter().all(|s| s.items == 2));
    assert_eq!(server.hits(), r.sessions_total);
}
