//! Protocol adapters: translate a validated request into a service's native
//! protocol, run the exchange against one backend, and translate the reply.

pub mod rest;
pub mod soap;
pub mod socket;

use std::time::{Duration, Instant};

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

use crate::clock::Clock;
use crate::codec::{EclRequest, EclResponse, ECL_VERSION};
use crate::registry::{AdapterKind, Endpoint, FunctionSig, ServiceRecord};

pub use rest::{translate_rest_response, translate_to_rest, RestRequest};
pub use soap::{translate_soap_response, translate_to_soap};
pub use socket::{translate_socket_response, translate_to_socket};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

/// Largest backend reply read before giving up.
const MAX_REPLY: usize = 4 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdapterError {
    #[error("backend unreachable: {0}")]
    BackendUnreachable(String),
    #[error("backend timed out: {0}")]
    Timeout(String),
    #[error("SOAP fault: {0}")]
    SoapFault(String),
    #[error("malformed SOAP: {0}")]
    MalformedSoap(String),
    #[error("backend failure: {0}")]
    BackendFailure(String),
}

/// Wire-level record of one backend attempt, successful or not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exchange {
    pub backend: Endpoint,
    pub request_bytes: Vec<u8>,
    pub response_bytes: Vec<u8>,
    pub elapsed: Duration,
}

/// Response metadata mirrors the request: the service answers the client.
pub(crate) fn build_response(
    return_value: String,
    original: &EclRequest,
    sig: &FunctionSig,
    record: &ServiceRecord,
    clock: &dyn Clock,
) -> EclResponse {
    EclResponse {
        source_ip: record.advertised_ip.clone(),
        destination_ip: original.source_ip.clone(),
        source_id: record.service_id,
        destination_id: original.source_id,
        return_value,
        return_type: sig.return_type,
        stamp: clock.stamp(),
        version: ECL_VERSION.to_string(),
    }
}

/// The bytes [`Adapters::execute`] would send to `backend`, without sending.
pub fn wire_request(record: &ServiceRecord, backend: &Endpoint, req: &EclRequest, sig: &FunctionSig) -> Vec<u8> {
    match record.protocol {
        AdapterKind::Soap => translate_to_soap(req, sig, &record.soap_namespace()).into_bytes(),
        AdapterKind::Rest => translate_to_rest(req, sig, backend).to_string().into_bytes(),
        AdapterKind::Socket => translate_to_socket(req, sig),
    }
}

/// Result of [`Adapters::execute`]. The exchange is present for every attempt.
#[derive(Debug)]
pub struct Execution {
    pub result: Result<EclResponse, AdapterError>,
    pub exchange: Exchange,
}

/// Stateless adapter set sharing one HTTP client. Safe to use concurrently.
#[derive(Debug, Clone)]
pub struct Adapters {
    http: reqwest::Client,
    timeout: Duration,
}

impl Default for Adapters {
    fn default() -> Self {
        Self::new(DEFAULT_TIMEOUT)
    }
}

impl Adapters {
    pub fn new(timeout: Duration) -> Self {
        let http = reqwest::Client::builder()
            .no_proxy()
            .pool_max_idle_per_host(0)
            .connect_timeout(timeout)
            .timeout(timeout)
            .build()
            .expect("HTTP client configuration is static");
        Self { http, timeout }
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub async fn execute(
        &self,
        kind: AdapterKind,
        record: &ServiceRecord,
        backend: &Endpoint,
        req: &EclRequest,
        sig: &FunctionSig,
        clock: &dyn Clock,
    ) -> Execution {
        let started = Instant::now();
        let (request_bytes, outcome) = match kind {
            AdapterKind::Soap => {
                let envelope = translate_to_soap(req, sig, &record.soap_namespace());
                let outcome = self.post_soap(backend, &envelope).await;
                (envelope.into_bytes(), outcome)
            }
            AdapterKind::Rest => {
                let rest = translate_to_rest(req, sig, backend);
                let outcome = self.get_rest(backend, &rest).await;
                (rest.to_string().into_bytes(), outcome)
            }
            AdapterKind::Socket => {
                let line = translate_to_socket(req, sig);
                let outcome = self.socket_call(backend, &line).await;
                (line, outcome)
            }
        };
        let (response_bytes, result) = match outcome {
            Ok((status, body)) => {
                let result = match kind {
                    AdapterKind::Soap => {
                        let text = String::from_utf8_lossy(&body);
                        match translate_soap_response(&text, req, sig, record, clock) {
                            Err(AdapterError::MalformedSoap(_)) if status != 200 => Err(AdapterError::BackendFailure(
                                format!("SOAP backend answered HTTP {status}"),
                            )),
                            other => other,
                        }
                    }
                    AdapterKind::Rest => match std::str::from_utf8(&body) {
                        Ok(text) => translate_rest_response(status, text, req, sig, record, clock),
                        Err(_) => Err(AdapterError::BackendFailure("REST body is not UTF-8".into())),
                    },
                    AdapterKind::Socket => translate_socket_response(&body, req, sig, record, clock),
                };
                (body, result)
            }
            Err(e) => (Vec::new(), Err(e)),
        };
        Execution {
            result,
            exchange: Exchange {
                backend: backend.clone(),
                request_bytes,
                response_bytes,
                elapsed: started.elapsed(),
            },
        }
    }

    fn url(backend: &Endpoint, target: &str) -> String {
        format!("http://{}{}", backend.authority(), target)
    }

    fn classify(&self, backend: &Endpoint, e: reqwest::Error) -> AdapterError {
        if e.is_timeout() {
            AdapterError::Timeout(format!("{backend} did not answer within {:?}", self.timeout))
        } else if e.is_connect() {
            AdapterError::BackendUnreachable(format!("{backend}: {e}"))
        } else {
            AdapterError::BackendFailure(format!("{backend}: {e}"))
        }
    }

    async fn read_http(
        &self,
        backend: &Endpoint,
        resp: Result<reqwest::Response, reqwest::Error>,
    ) -> Result<(u16, Vec<u8>), AdapterError> {
        let resp = resp.map_err(|e| self.classify(backend, e))?;
        let status = resp.status().as_u16();
        let body = resp.bytes().await.map_err(|e| self.classify(backend, e))?;
        Ok((status, body.to_vec()))
    }

    async fn post_soap(&self, backend: &Endpoint, envelope: &str) -> Result<(u16, Vec<u8>), AdapterError> {
        let url = Self::url(backend, backend.path.as_deref().unwrap_or("/"));
        let resp = self
            .http
            .post(url)
            .header(reqwest::header::CONTENT_TYPE, soap::CONTENT_TYPE)
            .body(envelope.to_string())
            .send()
            .await;
        self.read_http(backend, resp).await
    }

    async fn get_rest(&self, backend: &Endpoint, rest: &RestRequest) -> Result<(u16, Vec<u8>), AdapterError> {
        let resp = self.http.get(Self::url(backend, &rest.target)).send().await;
        self.read_http(backend, resp).await
    }

    /// One connection per call; reads until the first newline or EOF.
    async fn socket_call(&self, backend: &Endpoint, line: &[u8]) -> Result<(u16, Vec<u8>), AdapterError> {
        let exchange = async {
            let mut stream = TcpStream::connect(backend.authority())
                .await
                .map_err(|e| AdapterError::BackendUnreachable(format!("{backend}: {e}")))?;
            let io_err = |e: std::io::Error| AdapterError::BackendFailure(format!("{backend}: {e}"));
            stream.write_all(line).await.map_err(io_err)?;
            let mut reply = Vec::new();
            let mut buf = [0u8; 1024];
            loop {
                let n = stream.read(&mut buf).await.map_err(io_err)?;
                if n == 0 {
                    break;
                }
                reply.extend_from_slice(&buf[..n]);
                if let Some(pos) = reply.iter().position(|&b| b == b'\n') {
                    reply.truncate(pos + 1);
                    break;
                }
                if reply.len() > MAX_REPLY {
                    return Err(AdapterError::BackendFailure(format!("{backend}: reply too long")));
                }
            }
            Ok((200, reply))
        };
        tokio::time::timeout(self.timeout, exchange).await.unwrap_or_else(|_| {
            Err(AdapterError::Timeout(format!(
                "{backend} did not answer within {:?}",
                self.timeout
            )))
        })
    }
}
