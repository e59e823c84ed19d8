//! The gateway pipeline and its listeners.
//!
//! [`Gateway::handle`] takes one raw ECL request through size check,
//! classification, decryption, validation, service lookup, signature check,
//! backend selection, agent-gated adapter execution and translation back,
//! encrypting the reply iff the request was encrypted.

mod agents;
mod balance;
mod config;
mod error;
pub mod framing;
mod server;

use std::borrow::Cow;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

pub use agents::{AgentLease, AgentPool, QueueTimeout};
pub use balance::RoundRobin;
pub use config::{ConfigError, GatewayConfig, DEFAULT_ADAPTER_TIMEOUT, DEFAULT_MAX_AGENTS, DEFAULT_QUEUE_TIMEOUT};
pub use error::{ErrorCode, GatewayError, UnknownErrorCode};
pub use server::{error_frame, serve, RunningGateway, ServeError, ERROR_HEADER};

use crate::adapters::Adapters;
use crate::clock::{Clock, SystemClock};
use crate::codec::{self, CodecOptions, MessageKind};
use crate::crypto::{self, IvSource, RandomIv, TripleDesKey};
use crate::registry::{check_destination, check_signature, resolve_function, Registry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    /// Raw request bytes as received.
    EclIn,
    /// Bytes sent to the backend.
    WireOut,
    /// Bytes the backend answered.
    WireIn,
    /// Raw reply bytes sent to the client.
    EclOut,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub correlation: u64,
    pub stage: Stage,
    pub bytes: Vec<u8>,
}

/// Receives every message the gateway sees or emits, tagged per request.
pub trait TranscriptSink: Send + Sync {
    fn record(&self, entry: TranscriptEntry);
}

#[derive(Debug, Clone)]
pub struct GatewaySettings {
    pub key: Option<TripleDesKey>,
    pub max_agents: usize,
    pub adapter_timeout: Duration,
    pub queue_timeout: Duration,
    pub codec: CodecOptions,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        Self {
            key: None,
            max_agents: DEFAULT_MAX_AGENTS,
            adapter_timeout: DEFAULT_ADAPTER_TIMEOUT,
            queue_timeout: DEFAULT_QUEUE_TIMEOUT,
            codec: CodecOptions::default(),
        }
    }
}

pub struct Gateway {
    registry: RwLock<Arc<Registry>>,
    cursors: RoundRobin,
    agents: AgentPool,
    adapters: Adapters,
    key: Option<TripleDesKey>,
    codec: CodecOptions,
    queue_timeout: Duration,
    clock: Arc<dyn Clock>,
    iv: Arc<dyn IvSource>,
    transcript: Option<Arc<dyn TranscriptSink>>,
    next_correlation: AtomicU64,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("services", &self.registry().len())
            .field("agents", &self.agents)
            .field("encrypted", &self.key.is_some())
            .field("codec", &self.codec)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(registry: Registry, settings: GatewaySettings) -> Self {
        Self {
            registry: RwLock::new(Arc::new(registry)),
            cursors: RoundRobin::new(),
            agents: AgentPool::new(settings.max_agents),
            adapters: Adapters::new(settings.adapter_timeout),
            key: settings.key,
            codec: settings.codec,
            queue_timeout: settings.queue_timeout,
            clock: Arc::new(SystemClock),
            iv: Arc::new(RandomIv),
            transcript: None,
            next_correlation: AtomicU64::new(1),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_iv_source(mut self, iv: Arc<dyn IvSource>) -> Self {
        self.iv = iv;
        self
    }

    pub fn with_transcript(mut self, sink: Arc<dyn TranscriptSink>) -> Self {
        self.transcript = Some(sink);
        self
    }

    /// Current registry snapshot.
    pub fn registry(&self) -> Arc<Registry> {
        self.registry.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Swaps in a new registry. Requests already past lookup keep the old one.
    pub fn replace_registry(&self, registry: Registry) {
        *self.registry.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(registry);
    }

    pub fn agents(&self) -> &AgentPool {
        &self.agents
    }

    pub fn max_size(&self) -> usize {
        self.codec.max_size
    }

    fn record(&self, correlation: u64, stage: Stage, bytes: &[u8]) {
        if let Some(sink) = &self.transcript {
            sink.record(TranscriptEntry {
                correlation,
                stage,
                bytes: bytes.to_vec(),
            });
        }
    }

    pub async fn handle(&self, raw: &[u8]) -> Result<Vec<u8>, GatewayError> {
        let correlation = self.next_correlation.fetch_add(1, Ordering::Relaxed);
        self.record(correlation, Stage::EclIn, raw);
        let out = self.pipeline(correlation, raw).await;
        match &out {
            Ok(bytes) => self.record(correlation, Stage::EclOut, bytes),
            Err(e) => tracing::debug!(correlation, %e, "request failed"),
        }
        out
    }

    async fn pipeline(&self, correlation: u64, raw: &[u8]) -> Result<Vec<u8>, GatewayError> {
        if raw.len() > self.codec.max_size {
            return Err(GatewayError::new(
                ErrorCode::Oversize,
                format!(
                    "document of {} bytes exceeds the {}-byte limit",
                    raw.len(),
                    self.codec.max_size
                ),
            ));
        }
        let text = std::str::from_utf8(raw)
            .map_err(|e| GatewayError::new(ErrorCode::InvalidXml, format!("request is not UTF-8: {e}")))?;

        let encrypted = codec::detect_kind(text)? == MessageKind::EncryptedRequest;
        let plain: Cow<'_, str> = if encrypted {
            let key = self.key.as_ref().ok_or_else(|| {
                GatewayError::new(ErrorCode::DecryptFailure, "encrypted request but no key is configured")
            })?;
            Cow::Owned(crypto::decrypt_request_document(text, key, &self.codec)?)
        } else {
            Cow::Borrowed(text)
        };
        let req = codec::parse_request_with(&plain, &self.codec)?;

        let registry = self.registry();
        let record = registry.lookup(req.destination_id)?;
        if self.codec.strict {
            let report = check_destination(&req, record);
            if !report.ok() {
                return Err(GatewayError::new(ErrorCode::SignatureMismatch, report.to_string()));
            }
        }
        let sig = resolve_function(record, &req.function_invoked)?;
        let report = check_signature(&req, sig);
        if !report.ok() {
            return Err(GatewayError::new(ErrorCode::SignatureMismatch, report.to_string()));
        }

        let backend = self.cursors.next_backend(record);
        let lease = self
            .agents
            .acquire(self.queue_timeout)
            .await
            .map_err(|e| GatewayError::new(ErrorCode::Timeout, e.to_string()))?;
        let exec = self
            .adapters
            .execute(record.protocol, record, backend, &req, sig, &*self.clock)
            .await;
        drop(lease);
        self.record(correlation, Stage::WireOut, &exec.exchange.request_bytes);
        if !exec.exchange.response_bytes.is_empty() {
            self.record(correlation, Stage::WireIn, &exec.exchange.response_bytes);
        }
        let resp = exec.result?;

        let out = match &self.key {
            Some(key) if encrypted => {
                crypto::encrypt_response_payload_with(&resp, key, &*self.iv, &self.codec).map_err(GatewayError::from)
            }
            _ => codec::serialize_response_with(&resp, &self.codec).map_err(GatewayError::from),
        };
        out.map(String::into_bytes).map_err(|e| {
            GatewayError::new(
                ErrorCode::BackendFailure,
                format!("backend reply does not form a valid ECL response: {}", e.detail),
            )
        })
    }
}
