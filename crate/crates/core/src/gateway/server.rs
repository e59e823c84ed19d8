//! HTTP (`POST /ecl`) and framed-TCP listeners over one [`Gateway`].

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::State;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::Router;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::watch;
use tokio::task::{JoinHandle, JoinSet};

use super::framing::{read_frame, write_frame, FrameError};
use super::{ConfigError, ErrorCode, Gateway, GatewayConfig, GatewayError};

pub const ERROR_HEADER: &str = "X-ECL-Error";

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
}

/// Listeners bound and accepting. Dropping this without [`shutdown`] leaves
/// the tasks running until the runtime stops.
///
/// [`shutdown`]: RunningGateway::shutdown
#[derive(Debug)]
pub struct RunningGateway {
    gateway: Arc<Gateway>,
    http_addr: Option<SocketAddr>,
    tcp_addr: Option<SocketAddr>,
    stop: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

/// Loads the registry named by `config` and starts its listeners.
pub async fn serve(config: &GatewayConfig) -> Result<RunningGateway, ServeError> {
    config.validate()?;
    let registry = config.load_registry()?;
    let gateway = Arc::new(Gateway::new(registry, config.settings()));
    RunningGateway::start(gateway, config.http, config.tcp).await
}

async fn bind(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })
}

impl RunningGateway {
    /// Binds the given listeners (port 0 picks a free port) for `gateway`.
    pub async fn start(
        gateway: Arc<Gateway>,
        http: Option<SocketAddr>,
        tcp: Option<SocketAddr>,
    ) -> Result<Self, ServeError> {
        let http_listener = match http {
            Some(a) => Some(bind(a).await?),
            None => None,
        };
        let tcp_listener = match tcp {
            Some(a) => Some(bind(a).await?),
            None => None,
        };
        let (stop, _) = watch::channel(false);
        let mut running = Self {
            gateway: gateway.clone(),
            http_addr: None,
            tcp_addr: None,
            stop,
            tasks: Vec::new(),
        };
        if let Some(listener) = http_listener {
            running.http_addr = listener.local_addr().ok();
            let mut rx = running.stop.subscribe();
            let app = Router::new().route("/ecl", post(post_ecl)).with_state(gateway.clone());
            running.tasks.push(tokio::spawn(async move {
                let shutdown = async move {
                    let _ = rx.wait_for(|&s| s).await;
                };
                if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
                    tracing::error!(%e, "HTTP listener failed");
                }
            }));
            tracing::info!(addr = ?running.http_addr, "HTTP listener ready");
        }
        if let Some(listener) = tcp_listener {
            running.tcp_addr = listener.local_addr().ok();
            let rx = running.stop.subscribe();
            running.tasks.push(tokio::spawn(accept_frames(listener, gateway, rx)));
            tracing::info!(addr = ?running.tcp_addr, "framed TCP listener ready");
        }
        Ok(running)
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    pub fn http_addr(&self) -> Option<SocketAddr> {
        self.http_addr
    }

    pub fn tcp_addr(&self) -> Option<SocketAddr> {
        self.tcp_addr
    }

    /// Stops accepting, lets in-flight requests finish, then returns.
    pub async fn shutdown(self) {
        let _ = self.stop.send(true);
        for t in self.tasks {
            let _ = t.await;
        }
    }
}

fn error_response(e: &GatewayError) -> Response {
    let status = StatusCode::from_u16(e.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let mut resp = (status, e.to_string()).into_response();
    resp.headers_mut().insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static("text/plain; charset=utf-8"),
    );
    resp.headers_mut()
        .insert(ERROR_HEADER, HeaderValue::from_static(e.code.as_str()));
    resp
}

async fn post_ecl(State(gateway): State<Arc<Gateway>>, body: Body) -> Response {
    let limit = gateway.max_size();
    let bytes = match axum::body::to_bytes(body, limit.saturating_add(1)).await {
        Ok(b) => b,
        Err(e) => {
            return error_response(&GatewayError::new(
                ErrorCode::Oversize,
                format!("request body exceeds the {limit}-byte limit or was cut short: {e}"),
            ))
        }
    };
    match gateway.handle(&bytes).await {
        Ok(out) => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, HeaderValue::from_static("application/xml"))],
            out,
        )
            .into_response(),
        Err(e) => error_response(&e),
    }
}

async fn accept_frames(listener: TcpListener, gateway: Arc<Gateway>, mut stop: watch::Receiver<bool>) {
    let mut conns = JoinSet::new();
    let for_conns = stop.clone();
    loop {
        tokio::select! {
            _ = stop.wait_for(|&s| s) => break,
            accepted = listener.accept() => match accepted {
                Ok((stream, _)) => {
                    conns.spawn(serve_frames(stream, gateway.clone(), for_conns.clone()));
                }
                Err(e) => tracing::warn!(%e, "accept failed"),
            },
            Some(_) = conns.join_next(), if !conns.is_empty() => {}
        }
    }
    drop(listener);
    while conns.join_next().await.is_some() {}
}

/// Serves frames on one connection until the peer closes or shutdown begins.
/// A request already read is always answered.
async fn serve_frames(mut stream: TcpStream, gateway: Arc<Gateway>, mut stop: watch::Receiver<bool>) {
    let limit = gateway.max_size();
    loop {
        let frame = tokio::select! {
            _ = stop.wait_for(|&s| s) => return,
            f = read_frame(&mut stream, limit) => f,
        };
        let reply = match frame {
            Ok(None) => return,
            Ok(Some(bytes)) => match gateway.handle(&bytes).await {
                Ok(out) => out,
                Err(e) => error_frame(&e),
            },
            Err(FrameError::TooLarge { len, limit }) => {
                let e = GatewayError::new(
                    ErrorCode::Oversize,
                    format!("frame of {len} bytes exceeds the {limit}-byte limit"),
                );
                let _ = write_frame(&mut stream, &error_frame(&e)).await;
                return;
            }
            Err(FrameError::Io(_)) => return,
        };
        if write_frame(&mut stream, &reply).await.is_err() {
            return;
        }
    }
}

pub fn error_frame(e: &GatewayError) -> Vec<u8> {
    format!("ERR {e}").into_bytes()
}
