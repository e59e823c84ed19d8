use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use ecu_core::codec::{self, CodecError, EclRequest, EclResponse, MessageKind};
use ecu_core::crypto::{self, CryptoError, TripleDesKey};
use ecu_core::gateway::framing::{is_error_frame, read_frame, write_frame};
use ecu_core::gateway::{ErrorCode, GatewayError, ERROR_HEADER};
use tokio::net::TcpStream;

const CLIENT_TIMEOUT: Duration = Duration::from_secs(60);
const MAX_REPLY: usize = 64 * 1024 * 1024;

/// Where a gateway listens: `http://host:port[/ecl]` or `tcp://host:port`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EcuAddress {
    Http(String),
    Tcp(String),
}

impl fmt::Display for EcuAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EcuAddress::Http(a) => write!(f, "http://{a}/ecl"),
            EcuAddress::Tcp(a) => write!(f, "tcp://{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("ECU address must be http://HOST:PORT or tcp://HOST:PORT, got `{0}`")]
pub struct BadAddress(pub String);

impl FromStr for EcuAddress {
    type Err = BadAddress;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BadAddress(s.to_string());
        let (ctor, rest): (fn(String) -> EcuAddress, &str) = if let Some(r) = s.strip_prefix("http://") {
            (EcuAddress::Http, r.strip_suffix("/ecl").unwrap_or(r))
        } else if let Some(r) = s.strip_prefix("tcp://") {
            (EcuAddress::Tcp, r)
        } else {
            return Err(bad());
        };
        match rest.rsplit_once(':') {
            Some((host, port)) if !host.is_empty() && !rest.contains('/') && port.parse::<u16>().is_ok() => {
                Ok(ctor(rest.to_string()))
            }
            _ => Err(bad()),
        }
    }
}

impl EcuAddress {
    pub fn http(addr: std::net::SocketAddr) -> Self {
        EcuAddress::Http(addr.to_string())
    }

    pub fn tcp(addr: std::net::SocketAddr) -> Self {
        EcuAddress::Tcp(addr.to_string())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// The gateway answered with an error. `http_status` is set for HTTP.
    #[error("{error}")]
    Gateway {
        error: GatewayError,
        http_status: Option<u16>,
    },
    #[error("transport: {0}")]
    Transport(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("unexpected reply: {0}")]
    Protocol(String),
}

impl ClientError {
    pub fn code(&self) -> Option<ErrorCode> {
        match self {
            ClientError::Gateway { error, .. } => Some(error.code),
            _ => None,
        }
    }

    pub fn http_status(&self) -> Option<u16> {
        match self {
            ClientError::Gateway { http_status, .. } => *http_status,
            _ => None,
        }
    }
}

fn transport(e: impl fmt::Display) -> ClientError {
    ClientError::Transport(e.to_string())
}

/// Sends raw bytes and returns the raw ECL reply.
pub async fn client_send_raw(addr: &EcuAddress, payload: &[u8]) -> Result<Vec<u8>, ClientError> {
    match addr {
        EcuAddress::Http(authority) => {
            let client = reqwest::Client::builder()
                .no_proxy()
                .timeout(CLIENT_TIMEOUT)
                .build()
                .map_err(transport)?;
            let resp = client
                .post(format!("http://{authority}/ecl"))
                .header(reqwest::header::CONTENT_TYPE, "application/xml")
                .body(payload.to_vec())
                .send()
                .await
                .map_err(transport)?;
            let status = resp.status().as_u16();
            let header_code = resp
                .headers()
                .get(ERROR_HEADER)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string);
            let body = resp.bytes().await.map_err(transport)?;
            if status == 200 {
                return Ok(body.to_vec());
            }
            let text = String::from_utf8_lossy(&body);
            let error = GatewayError::parse(&text)
                .filter(|e| header_code.as_deref().is_none_or(|h| h == e.code.as_str()))
                .ok_or_else(|| ClientError::Protocol(format!("HTTP {status}: {text}")))?;
            Err(ClientError::Gateway {
                error,
                http_status: Some(status),
            })
        }
        EcuAddress::Tcp(authority) => {
            let exchange = async {
                let mut stream = TcpStream::connect(authority).await.map_err(transport)?;
                write_frame(&mut stream, payload).await.map_err(transport)?;
                read_frame(&mut stream, MAX_REPLY)
                    .await
                    .map_err(transport)?
                    .ok_or_else(|| ClientError::Transport("connection closed before a reply".into()))
            };
            let reply = tokio::time::timeout(CLIENT_TIMEOUT, exchange)
                .await
                .map_err(|_| ClientError::Transport("no reply within the client timeout".into()))??;
            if !is_error_frame(&reply) {
                return Ok(reply);
            }
            let text = String::from_utf8_lossy(&reply);
            let error = text
                .strip_prefix("ERR ")
                .and_then(GatewayError::parse)
                .ok_or_else(|| ClientError::Protocol(format!("bad error frame: {text}")))?;
            Err(ClientError::Gateway {
                error,
                http_status: None,
            })
        }
    }
}

/// Serializes `req` (payload-encrypted when `key` is given), sends it, and
/// parses the reply, decrypting it when it arrives encrypted.
pub async fn client_send(
    addr: &EcuAddress,
    req: &EclRequest,
    key: Option<&TripleDesKey>,
) -> Result<EclResponse, ClientError> {
    let payload = match key {
        Some(key) => crypto::encrypt_request_payload(req, key)?,
        None => codec::serialize_request(req)?,
    };
    let reply = client_send_raw(addr, payload.as_bytes()).await?;
    let text = String::from_utf8(reply).map_err(|_| ClientError::Protocol("reply is not UTF-8".into()))?;
    match codec::detect_reply_kind(&text)? {
        MessageKind::EncryptedResponse => {
            let key = key.ok_or_else(|| ClientError::Protocol("encrypted reply but no key".into()))?;
            Ok(crypto::decrypt_response_payload(&text, key)?)
        }
        _ => Ok(codec::parse_response(&text)?),
    }
}
