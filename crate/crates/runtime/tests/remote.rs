use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use parley_core::rg::{Registration, TopicScope};
use parley_core::types::{SystemAction, TopicId};
use parley_core::dm::ResponseConstraints;
use parley_runtime::commands::build_engine;
use parley_runtime::remote::{RemoteRg, RemoteRequest};

/// Serves `replies` in order, one per connection, after `delay`. Returns the
/// endpoint and the request bodies seen.
fn stub(replies: Vec<String>, delay: Duration) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for reply in replies {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; len];
            let _ = reader.read_exact(&mut body);
            log.lock().unwrap().push(String::from_utf8_lossy(&body).into_owned());
            thread::sleep(delay);
            let mut stream = stream;
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                reply.len(),
                reply
            );
        }
    });
    (format!("http://{addr}/respond"), seen)
}

fn request() -> RemoteRequest {
    RemoteRequest {
        conversation_id: "r1".into(),
        turn_index: 3,
        user_text: "tell me more".into(),
        action: SystemAction::Converse,
        constraints: ResponseConstraints::topic_only(TopicId::new("music")),
        dialogue_acts: Vec::new(),
        entities: Vec::new(),
    }
}

fn pack_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../packs/default")
}

fn rg(endpoint: &str, timeout: Duration) -> RemoteRg {
    RemoteRg::new(
        "legacy",
        endpoint,
        Registration::new([SystemAction::Converse], TopicScope::Only([TopicId::new("music")].into())),
        timeout,
    )
}

#[test]
fn one_candidate_comes_back() {
    let (url, seen) = stub(vec![r#"{"candidates":[{"body":"I can tell you a story."}]}"#.into()], Duration::ZERO);
    let reply = rg(&url, Duration::from_secs(2)).call(&request()).unwrap();
    assert_eq!(reply.candidates.len(), 1);
    assert_eq!(reply.candidates[0].body, "I can tell you a story.");
    let sent: serde_json::Value = serde_json::from_str(&seen.lock().unwrap()[0]).unwrap();
    assert_eq!(sent["user_text"], "tell me more");
    assert_eq!(sent["action"], "converse");
}

#[test]
fn slow_server_times_out() {
    let (url, _) = stub(vec![r#"{"candidates":[]}"#.into()], Duration::from_secs(3));
    let start = Instant::now();
    assert!(rg(&url, Duration::from_millis(150)).call(&request()).is_none());
    assert!(start.elapsed() < Duration::from_secs(2));
}

#[test]
fn malformed_reply_is_dropped() {
    let (url, _) = stub(
        vec!["this is not json".into(), r#"{"candidates":"nope"}"#.into()],
        Duration::ZERO,
    );
    let r = rg(&url, Duration::from_secs(2));
    assert!(r.call(&request()).is_none());
    assert!(r.call(&request()).is_none());
}

#[test]
fn refused_connection_is_none() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    assert!(rg(&format!("http://127.0.0.1:{port}/x"), Duration::from_millis(500)).call(&request()).is_none());
}

#[test]
fn remote_candidate_reaches_the_pool() {
    let reply = r#"{"candidates":[{"body":"Here is something from far away.","dialogue_act":"statement-non-opinion"}]}"#;
    let (url, _) = stub(vec![reply.into(); 4], Duration::ZERO);
    let mut engine = build_engine(&pack_dir(), None).unwrap();
    engine.register_rg(Arc::new(rg(&url, Duration::from_millis(250)))).unwrap();
    let id = "remote-pool";
    for text in ["hi", "let's talk about music"] {
        engine.converse(id, text, &mut |_| {}).unwrap();
    }
    let r = engine.converse(id, "i don't know", &mut |_| {}).unwrap();
    assert_eq!(r.trace.action, SystemAction::Converse);
    assert!(r.trace.dispatched.iter().any(|d| d == "legacy"));
    assert_eq!(format!("{:?}", r.trace.rg_status["legacy"]), "Ok");
    assert!(r.trace.pool_raw >= 1);
}
