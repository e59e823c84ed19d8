//! Mock backend services honoring the adapter wire formats.
//!
//! Each mock can answer in-process through [`MockKind::respond`] or over a
//! real socket through [`spawn_mock`].

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::http::{header, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use ecu_core::adapters::soap::{fault_envelope, CONTENT_TYPE, ENCODING_STYLE, ENVELOPE_NS};
use ecu_core::adapters::socket::{escape_value, split_args};
use ecu_core::codec::text::{escape_attr, escape_text};
use percent_encoding::percent_decode_str;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinHandle;

pub const APPLE_MEANING: &str = "fruit with red or yellow skin and sweet taste";
pub const UNKNOWN_WORD: &str = "unknown word";
/// Namespace the dictionary answers in when the request carries none.
pub const DICTIONARY_NS: &str = "urn:ecl:dictionary";

const GARBLED: &[u8] = b"\xff\xfe<<garbled";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockKind {
    /// SOAP over HTTP POST: `whatIs(word)`.
    SoapDictionary,
    /// Line protocol over TCP: `Max a,b`.
    SocketCalc,
    /// HTTP GET: echoes the query values joined by a space.
    RestEcho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    /// Close each connection as soon as it is accepted.
    Refuse,
    /// Answer with bytes no adapter can read.
    Garble,
    /// Sleep this long before answering.
    Sleep(Duration),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MockBehavior {
    /// Added before every answer.
    pub delay: Duration,
    pub failure: Option<Failure>,
}

impl MockBehavior {
    pub fn delayed(delay: Duration) -> Self {
        Self { delay, failure: None }
    }

    pub fn failing(failure: Failure) -> Self {
        Self {
            delay: Duration::ZERO,
            failure: Some(failure),
        }
    }
}

impl MockKind {
    /// The mock's deterministic answer. `input` is the SOAP envelope, the
    /// socket request line, or the REST request target (`/ws/echo?text=hi`).
    pub fn respond(self, input: &[u8]) -> Vec<u8> {
        match self {
            MockKind::SoapDictionary => dictionary(&String::from_utf8_lossy(input)).1.into_bytes(),
            MockKind::SocketCalc => calc(&String::from_utf8_lossy(input)).into_bytes(),
            MockKind::RestEcho => echo(&String::from_utf8_lossy(input)).into_bytes(),
        }
    }
}

/// Returns the HTTP status and the response envelope.
fn dictionary(input: &str) -> (u16, String) {
    let fault = |reason: &str| (500, fault_envelope("Sender", reason));
    let Ok(doc) = roxmltree::Document::parse(input) else {
        return fault("request is not XML");
    };
    let root = doc.root_element();
    if root.tag_name().name() != "Envelope" || root.tag_name().namespace() != Some(ENVELOPE_NS) {
        return fault("not a SOAP envelope");
    }
    let Some(call) = root
        .children()
        .find(|c| c.is_element() && c.tag_name().name() == "Body")
        .and_then(|body| body.children().find(|c| c.is_element()))
    else {
        return fault("empty Body");
    };
    if call.tag_name().name() != "whatIs" {
        return fault(&format!("unknown operation {}", call.tag_name().name()));
    }
    let Some(word) = call
        .children()
        .find(|c| c.is_element() && c.tag_name().name() == "word")
    else {
        return fault("missing m:word");
    };
    let word = word.text().unwrap_or_default().trim();
    let meaning = if word == "apple" { APPLE_MEANING } else { UNKNOWN_WORD };
    let ns = call.tag_name().namespace().unwrap_or(DICTIONARY_NS);
    // Same layout as the response the dictionary service was recorded with.
    let out = format!(
        "<?xml version=\"1.0\"?>\n<soap:Envelope\n  xmlns:soap=\"{ENVELOPE_NS}\"\n  soap:encodingStyle=\"{ENCODING_STYLE}\">\n<soap:Body>\n  <m:WhatIsResponse xmlns:m=\"{}\">\n    <m:meaning>{}</m:meaning>\n  </m:WhatIsResponse>\n</soap:Body>\n</soap:Envelope>\n",
        escape_attr(ns),
        escape_text(meaning)
    );
    (200, out)
}

fn calc(line: &str) -> String {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    let (function, field) = line.split_once(' ').unwrap_or((line, ""));
    let reply = match function {
        "Max" => match split_args(field).as_deref() {
            Some([a, b]) => match (a.parse::<i64>(), b.parse::<i64>()) {
                (Ok(a), Ok(b)) => a.max(b).to_string(),
                _ => "ERR arguments must be integers".to_string(),
            },
            _ => "ERR Max takes two arguments".to_string(),
        },
        other => format!("ERR unknown function {}", escape_value(other)),
    };
    format!("{reply}\n")
}

fn echo(target: &str) -> String {
    let query = target.split_once('?').map_or("", |(_, q)| q);
    query
        .split('&')
        .filter(|kv| !kv.is_empty())
        .map(|kv| {
            let v = kv.split_once('=').map_or("", |(_, v)| v);
            percent_decode_str(v).decode_utf8_lossy().into_owned()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

struct Shared {
    kind: MockKind,
    behavior: Mutex<MockBehavior>,
    hits: AtomicUsize,
}

impl Shared {
    fn behavior(&self) -> MockBehavior {
        *self.behavior.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Applies delay and sleep failure; returns whether to garble.
    async fn pause(&self) -> bool {
        let b = self.behavior();
        tokio::time::sleep(b.delay).await;
        match b.failure {
            Some(Failure::Sleep(d)) => {
                tokio::time::sleep(d).await;
                false
            }
            Some(Failure::Garble) => true,
            _ => false,
        }
    }

    fn refusing(&self) -> bool {
        self.behavior().failure == Some(Failure::Refuse)
    }
}

/// A running mock. Stops when dropped.
pub struct MockServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    task: JoinHandle<()>,
}

impl std::fmt::Debug for MockServer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockServer")
            .field("kind", &self.shared.kind)
            .field("addr", &self.addr)
            .field("hits", &self.hits())
            .finish()
    }
}

impl MockServer {
    pub fn kind(&self) -> MockKind {
        self.shared.kind
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    /// Requests received, including refused connections.
    pub fn hits(&self) -> usize {
        self.shared.hits.load(Ordering::SeqCst)
    }

    pub fn reset_hits(&self) {
        self.shared.hits.store(0, Ordering::SeqCst);
    }

    pub fn set_behavior(&self, behavior: MockBehavior) {
        *self.shared.behavior.lock().unwrap_or_else(|e| e.into_inner()) = behavior;
    }

    /// Waits for the listener to close.
    pub async fn stop(mut self) {
        self.task.abort();
        let _ = (&mut self.task).await;
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}

/// Starts `kind` on `addr` (port 0 picks a free port).
pub async fn spawn_mock(kind: MockKind, addr: SocketAddr, behavior: MockBehavior) -> std::io::Result<MockServer> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let shared = Arc::new(Shared {
        kind,
        behavior: Mutex::new(behavior),
        hits: AtomicUsize::new(0),
    });
    let task = match kind {
        MockKind::SocketCalc => tokio::spawn(serve_lines(listener, shared.clone())),
        MockKind::SoapDictionary | MockKind::RestEcho => {
            let app = Router::new().fallback(http_handler).with_state(shared.clone());
            let listener = CountingListener {
                inner: listener,
                shared: shared.clone(),
            };
            tokio::spawn(async move {
                let _ = axum::serve(listener, app).await;
            })
        }
    };
    Ok(MockServer { addr, shared, task })
}

fn local(port: u16) -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], port))
}

pub async fn soap_dictionary_mock(port: u16) -> std::io::Result<MockServer> {
    spawn_mock(MockKind::SoapDictionary, local(port), MockBehavior::default()).await
}

pub async fn socket_calc_mock(port: u16) -> std::io::Result<MockServer> {
    spawn_mock(MockKind::SocketCalc, local(port), MockBehavior::default()).await
}

pub async fn rest_echo_mock(port: u16) -> std::io::Result<MockServer> {
    spawn_mock(MockKind::RestEcho, local(port), MockBehavior::default()).await
}

/// Drops connections at accept while the mock is refusing.
struct CountingListener {
    inner: TcpListener,
    shared: Arc<Shared>,
}

impl axum::serve::Listener for CountingListener {
    type Io = TcpStream;
    type Addr = SocketAddr;

    async fn accept(&mut self) -> (Self::Io, Self::Addr) {
        loop {
            match self.inner.accept().await {
                Ok((stream, addr)) => {
                    if self.shared.refusing() {
                        self.shared.hits.fetch_add(1, Ordering::SeqCst);
                        drop(stream);
                        continue;
                    }
                    return (stream, addr);
                }
                Err(_) => tokio::time::sleep(Duration::from_millis(10)).await,
            }
        }
    }

    fn local_addr(&self) -> std::io::Result<Self::Addr> {
        self.inner.local_addr()
    }
}

async fn http_handler(State(shared): State<Arc<Shared>>, method: Method, uri: Uri, body: Bytes) -> Response {
    shared.hits.fetch_add(1, Ordering::SeqCst);
    let garble = shared.pause().await;
    if garble {
        return (StatusCode::OK, Body::from(GARBLED)).into_response();
    }
    match (shared.kind, method) {
        (MockKind::SoapDictionary, Method::POST) => {
            let (status, out) = dictionary(&String::from_utf8_lossy(&body));
            (
                StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
                [(header::CONTENT_TYPE, CONTENT_TYPE)],
                out,
            )
                .into_response()
        }
        (MockKind::RestEcho, Method::GET) => {
            let target = uri.path_and_query().map_or("/", |pq| pq.as_str());
            (
                StatusCode::OK,
                [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
                echo(target),
            )
                .into_response()
        }
        _ => StatusCode::METHOD_NOT_ALLOWED.into_response(),
    }
}

async fn serve_lines(listener: TcpListener, shared: Arc<Shared>) {
    loop {
        let Ok((stream, _)) = listener.accept().await else {
            tokio::time::sleep(Duration::from_millis(10)).await;
            continue;
        };
        shared.hits.fetch_add(1, Ordering::SeqCst);
        if shared.refusing() {
            continue;
        }
        let shared = shared.clone();
        tokio::spawn(async move {
            let (r, mut w) = stream.into_split();
            let mut line = String::new();
            if BufReader::new(r).read_line(&mut line).await.is_err() {
                return;
            }
            let reply = if shared.pause().await {
                GARBLED.to_vec()
            } else {
                calc(&line).into_bytes()
            };
            let _ = w.write_all(&reply).await;
        });
    }
}
