#![allow(dead_code)]

pub mod props;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::{json, Value};
use tiny_http::{Header, Response, Server};

use verity::claims::{SentenceVerdict, Strategy, Verdict};
use verity::judge::Judge;
use verity::provider::{Fixtures, MockModel, MockSearch};

pub const EASTWOOD: &str = "Clint Eastwood said Hollywood is \"the place of traitors and pedophiles\" and he decided to \"leave\" it to \"fight against traitors with real American patriots with president Trump.";
pub const MCCAIN: &str = "MoveOn.org says \"McCain opposes a woman's right to choose.\"";
pub const ROMNEY: &str =
    "Mitt Romney says that illegal immigrants get a $100,000 break on University of Texas tuition over four years.";
pub const NYT: &str = "Facebook posts \"The New York Times published an old stock photo of a young girl and claimed Israeli forces killed her during its recent war with Hamas.\"";

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixtures(name: &str) -> Fixtures {
    Fixtures::load(fixture(name)).unwrap()
}

pub fn mock_judge(strategy: Strategy, fixtures: &Fixtures) -> Judge {
    Judge::new(strategy, Arc::new(MockModel::new(fixtures)), "mock").with_search(Arc::new(MockSearch::new(fixtures)))
}

pub fn indexed(verdicts: Vec<Verdict>) -> Vec<SentenceVerdict> {
    verdicts
        .into_iter()
        .enumerate()
        .map(|(i, v)| SentenceVerdict::new(i, v))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Recorded {
    pub method: String,
    pub url: String,
    pub headers: HashMap<String, String>,
    pub body: String,
}

#[derive(Debug, Clone)]
pub struct Scripted {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Scripted {
    pub fn json(status: u16, body: Value) -> Self {
        Scripted {
            status,
            headers: vec![("Content-Type".into(), "application/json".into())],
            body: body.to_string(),
        }
    }

    pub fn with_header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }
}

/// Serves scripted responses in order (the last one repeats) and records
/// every request.
pub struct StubServer {
    pub base: String,
    pub requests: Arc<Mutex<Vec<Recorded>>>,
    server: Arc<Server>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

fn record(request: &mut tiny_http::Request) -> Recorded {
    let mut body = String::new();
    let _ = request.as_reader().read_to_string(&mut body);
    Recorded {
        method: request.method().to_string(),
        url: request.url().to_owned(),
        headers: request
            .headers()
            .iter()
            .map(|h| (h.field.as_str().as_str().to_ascii_lowercase(), h.value.as_str().to_owned()))
            .collect(),
        body,
    }
}

fn respond(request: tiny_http::Request, status: u16, headers: &[(String, String)], body: &str) {
    let mut response = Response::from_string(body).with_status_code(status);
    for (name, value) in headers {
        response.add_header(Header::from_bytes(name.as_bytes(), value.as_bytes()).unwrap());
    }
    let _ = request.respond(response);
}

impl StubServer {
    pub fn start(script: Vec<Scripted>) -> Self {
        Self::start_with(move |i, _| script[i.min(script.len() - 1)].clone())
    }

    /// `handler(n, request)` answers the n-th request.
    pub fn start_with(handler: impl Fn(usize, &Recorded) -> Scripted + Send + 'static) -> Self {
        let server = Arc::new(Server::http("127.0.0.1:0").unwrap());
        let base = format!("http://{}", server.server_addr().to_ip().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let handle = {
            let (server, requests, stop) = (server.clone(), requests.clone(), stop.clone());
            std::thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    let Ok(Some(mut request)) = server.recv_timeout(Duration::from_millis(20)) else {
                        continue;
                    };
                    let recorded = record(&mut request);
                    let n = {
                        let mut all = requests.lock().unwrap();
                        all.push(recorded.clone());
                        all.len() - 1
                    };
                    let reply = handler(n, &recorded);
                    respond(request, reply.status, &reply.headers, &reply.body);
                }
            })
        };
        StubServer {
            base,
            requests,
            server,
            stop,
            handle: Some(handle),
        }
    }

    pub fn requests(&self) -> Vec<Recorded> {
        self.requests.lock().unwrap().clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.server.unblock();
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

pub const BOT_TOKEN: &str = "123456:TEST-token-abcdef";

/// Fault injection for the stub bot API.
#[derive(Debug, Default)]
pub struct TelegramState {
    /// Every update ever queued, with ids assigned in order.
    pub updates: Vec<Value>,
    pub next_id: i64,
    /// Answer the next N `getUpdates` calls with HTTP 500.
    pub fail_get_updates: usize,
    /// Answer the next N `sendMessage` calls with HTTP 500.
    pub fail_send: usize,
    /// Ignore the offset on the next `getUpdates`, redelivering everything.
    pub redeliver_once: bool,
    /// Drop the response to the next `getUpdates` (empty result even though
    /// updates are pending).
    pub drop_once: bool,
    pub sent: Vec<(i64, String)>,
    pub offsets: Vec<i64>,
    pub get_calls: usize,
    pub send_calls: usize,
    pub bad_token_calls: usize,
}

impl TelegramState {
    pub fn enqueue(&mut self, chat_id: i64, text: &str) -> i64 {
        self.next_id += 1;
        let id = 1000 + self.next_id;
        self.updates.push(json!({
            "update_id": id,
            "message": {"message_id": id, "chat": {"id": chat_id, "type": "private"}, "text": text}
        }));
        id
    }
}

pub struct StubTelegram {
    pub state: Arc<Mutex<TelegramState>>,
    server: StubServer,
}

impl StubTelegram {
    pub fn start() -> Self {
        let state = Arc::new(Mutex::new(TelegramState::default()));
        let shared = state.clone();
        let server = StubServer::start_with(move |_, request| {
            let mut st = shared.lock().unwrap();
            let path = request.url.split('?').next().unwrap_or("");
            let Some(rest) = path.strip_prefix(&format!("/bot{BOT_TOKEN}/")) else {
                st.bad_token_calls += 1;
                return Scripted::json(401, json!({"ok": false, "error_code": 401, "description": "Unauthorized"}));
            };
            match rest {
                "getUpdates" => {
                    st.get_calls += 1;
                    let offset = query_param(&request.url, "offset").unwrap_or(0);
                    st.offsets.push(offset);
                    if st.fail_get_updates > 0 {
                        st.fail_get_updates -= 1;
                        return Scripted::json(500, json!({"ok": false, "description": "Internal Server Error"}));
                    }
                    if st.drop_once {
                        st.drop_once = false;
                        return Scripted::json(200, json!({"ok": true, "result": []}));
                    }
                    let redeliver = std::mem::take(&mut st.redeliver_once);
                    let result: Vec<Value> = st
                        .updates
                        .iter()
                        .filter(|u| redeliver || u["update_id"].as_i64().unwrap() >= offset)
                        .cloned()
                        .collect();
                    Scripted::json(200, json!({"ok": true, "result": result}))
                }
                "sendMessage" => {
                    st.send_calls += 1;
                    if st.fail_send > 0 {
                        st.fail_send -= 1;
                        return Scripted::json(500, json!({"ok": false, "description": "Internal Server Error"}));
                    }
                    let body: Value = serde_json::from_str(&request.body).unwrap_or(Value::Null);
                    let chat_id = body["chat_id"].as_i64().unwrap_or(-1);
                    let text = body["text"].as_str().unwrap_or("").to_owned();
                    st.sent.push((chat_id, text));
                    Scripted::json(200, json!({"ok": true, "result": {"message_id": 1}}))
                }
                _ => Scripted::json(404, json!({"ok": false, "description": "Not Found"})),
            }
        });
        StubTelegram { state, server }
    }

    pub fn base(&self) -> &str {
        &self.server.base
    }

    pub fn with<R>(&self, f: impl FnOnce(&mut TelegramState) -> R) -> R {
        f(&mut self.state.lock().unwrap())
    }

    pub fn raw_requests(&self) -> Vec<Recorded> {
        self.server.requests()
    }
}

fn query_param(url: &str, name: &str) -> Option<i64> {
    let query = url.split_once('?')?.1;
    query
        .split('&')
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| *k == name)
        .and_then(|(_, v)| v.parse().ok())
}
