//! Gateway configuration file.
//!
//! ```xml
//! <config>
//!   <listen http="127.0.0.1:8080" tcp="127.0.0.1:9090"/>
//!   <registry path="registry.xml"/>
//!   <key>0123456789ABCDEF23456789ABCDEF01456789ABCDEF0123</key>
//!   <maxAgents>16</maxAgents>
//!   <adapterTimeoutMs>10000</adapterTimeoutMs>
//!   <queueTimeoutMs>30000</queueTimeoutMs>
//!   <maxSize>1048576</maxSize>
//!   <strict>true</strict>
//! </config>
//! ```
//!
//! Only `registry` and at least one listen address are required. A relative
//! registry path resolves against the config file's directory. Without a
//! `<key>`, the `ECL_KEY` environment variable is consulted.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use roxmltree::Node;

use super::GatewaySettings;
use crate::codec::{CodecOptions, DEFAULT_MAX_SIZE};
use crate::crypto::{CryptoError, TripleDesKey, KEY_ENV};
use crate::registry::{load_registry_with, Registry, RegistryError};

pub const DEFAULT_MAX_AGENTS: usize = 16;
pub const DEFAULT_ADAPTER_TIMEOUT: Duration = Duration::from_secs(10);
pub const DEFAULT_QUEUE_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config is not well-formed XML: {0}")]
    Xml(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("invalid key: {0}")]
    Key(#[from] CryptoError),
    #[error("registry {path}: {source}")]
    Registry { path: PathBuf, source: RegistryError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    pub http: Option<SocketAddr>,
    pub tcp: Option<SocketAddr>,
    pub registry_path: PathBuf,
    pub key: Option<TripleDesKey>,
    pub max_agents: usize,
    pub adapter_timeout: Duration,
    pub queue_timeout: Duration,
    pub max_size: usize,
    pub strict: bool,
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn text(node: Node<'_, '_>) -> String {
    node.text().unwrap_or_default().trim().to_string()
}

fn number<T: std::str::FromStr>(node: Node<'_, '_>) -> Result<T, ConfigError> {
    let t = text(node);
    t.parse().map_err(|_| {
        invalid(format!(
            "<{}> must be a non-negative integer, got `{t}`",
            node.tag_name().name()
        ))
    })
}

fn addr(node: Node<'_, '_>, attr: &str) -> Result<Option<SocketAddr>, ConfigError> {
    node.attribute(attr)
        .map(|v| {
            v.parse()
                .map_err(|_| invalid(format!("listen {attr}=`{v}` is not a socket address")))
        })
        .transpose()
}

impl GatewayConfig {
    /// Parses config text. `base_dir` anchors a relative registry path; the
    /// environment is not consulted.
    pub fn from_xml(text_in: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let doc = roxmltree::Document::parse(text_in).map_err(|e| ConfigError::Xml(e.to_string()))?;
        let root = doc.root_element();
        if root.tag_name().name() != "config" {
            return Err(invalid(format!(
                "document element is <{}>, not <config>",
                root.tag_name().name()
            )));
        }
        let mut cfg = GatewayConfig {
            http: None,
            tcp: None,
            registry_path: PathBuf::new(),
            key: None,
            max_agents: DEFAULT_MAX_AGENTS,
            adapter_timeout: DEFAULT_ADAPTER_TIMEOUT,
            queue_timeout: DEFAULT_QUEUE_TIMEOUT,
            max_size: DEFAULT_MAX_SIZE,
            strict: true,
        };
        let mut registry = None;
        for node in root.children().filter(|n| n.is_element()) {
            match node.tag_name().name() {
                "listen" => {
                    cfg.http = addr(node, "http")?.or(cfg.http);
                    cfg.tcp = addr(node, "tcp")?.or(cfg.tcp);
                }
                "registry" => {
                    let path = node
                        .attribute("path")
                        .ok_or_else(|| invalid("<registry> needs a path attribute"))?;
                    registry = Some(base_dir.join(path));
                }
                "key" => cfg.key = Some(TripleDesKey::from_hex(&text(node))?),
                "maxAgents" => cfg.max_agents = number(node)?,
                "adapterTimeoutMs" => cfg.adapter_timeout = Duration::from_millis(number(node)?),
                "queueTimeoutMs" => cfg.queue_timeout = Duration::from_millis(number(node)?),
                "maxSize" => cfg.max_size = number(node)?,
                "strict" => {
                    cfg.strict = match text(node).as_str() {
                        "true" => true,
                        "false" => false,
                        other => return Err(invalid(format!("<strict> must be true or false, got `{other}`"))),
                    }
                }
                other => return Err(invalid(format!("unknown element <{other}>"))),
            }
        }
        cfg.registry_path = registry.ok_or_else(|| invalid("missing <registry>"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file, falling back to `ECL_KEY` for the key.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text_in = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::from_xml(&text_in, base)?;
        if cfg.key.is_none() {
            if let Ok(hex) = std::env::var(KEY_ENV) {
                cfg.key = Some(TripleDesKey::from_hex(hex.trim())?);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.http.is_none() && self.tcp.is_none() {
            return Err(invalid("<listen> needs an http or tcp address"));
        }
        if self.max_agents == 0 {
            return Err(invalid("maxAgents must be positive"));
        }
        if self.adapter_timeout.is_zero() || self.queue_timeout.is_zero() {
            return Err(invalid("timeouts must be positive"));
        }
        if self.max_size == 0 {
            return Err(invalid("maxSize must be positive"));
        }
        Ok(())
    }

    pub fn load_registry(&self) -> Result<Registry, ConfigError> {
        let text_in = std::fs::read_to_string(&self.registry_path).map_err(|source| ConfigError::Io {
            path: self.registry_path.clone(),
            source,
        })?;
        load_registry_with(&text_in, self.strict).map_err(|source| ConfigError::Registry {
            path: self.registry_path.clone(),
            source,
        })
    }

    pub fn settings(&self) -> GatewaySettings {
        GatewaySettings {
            key: self.key.clone(),
            max_agents: self.max_agents,
            adapter_timeout: self.adapter_timeout,
            queue_timeout: self.queue_timeout,
            codec: CodecOptions {
                strict: self.strict,
                max_size: self.max_size,
            },
        }
    }
}
