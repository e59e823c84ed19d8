use std::fmt;
use std::str::FromStr;

use crate::adapters::AdapterError;
use crate::codec::CodecError;
use crate::crypto::CryptoError;
use crate::registry::RegistryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    InvalidXml,
    GrammarViolation,
    UnsupportedVersion,
    DecryptFailure,
    UnknownService,
    UnknownFunction,
    SignatureMismatch,
    BackendUnreachable,
    Timeout,
    BackendFailure,
    Oversize,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 11] = [
        ErrorCode::InvalidXml,
        ErrorCode::GrammarViolation,
        ErrorCode::UnsupportedVersion,
        ErrorCode::DecryptFailure,
        ErrorCode::UnknownService,
        ErrorCode::UnknownFunction,
        ErrorCode::SignatureMismatch,
        ErrorCode::BackendUnreachable,
        ErrorCode::Timeout,
        ErrorCode::BackendFailure,
        ErrorCode::Oversize,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::InvalidXml => "InvalidXml",
            ErrorCode::GrammarViolation => "GrammarViolation",
            ErrorCode::UnsupportedVersion => "UnsupportedVersion",
            ErrorCode::DecryptFailure => "DecryptFailure",
            ErrorCode::UnknownService => "UnknownService",
            ErrorCode::UnknownFunction => "UnknownFunction",
            ErrorCode::SignatureMismatch => "SignatureMismatch",
            ErrorCode::BackendUnreachable => "BackendUnreachable",
            ErrorCode::Timeout => "Timeout",
            ErrorCode::BackendFailure => "BackendFailure",
            ErrorCode::Oversize => "Oversize",
        }
    }

    /// HTTP status used by the `/ecl` listener.
    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::InvalidXml
            | ErrorCode::GrammarViolation
            | ErrorCode::UnsupportedVersion
            | ErrorCode::SignatureMismatch
            | ErrorCode::Oversize => 400,
            ErrorCode::DecryptFailure => 403,
            ErrorCode::UnknownService | ErrorCode::UnknownFunction => 404,
            ErrorCode::Timeout => 504,
            ErrorCode::BackendUnreachable | ErrorCode::BackendFailure => 502,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown gateway error code `{0}`")]
pub struct UnknownErrorCode(pub String);

impl FromStr for ErrorCode {
    type Err = UnknownErrorCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorCode::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownErrorCode(s.to_string()))
    }
}

/// A pipeline failure as seen by the client.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{code}: {detail}")]
pub struct GatewayError {
    pub code: ErrorCode,
    pub detail: String,
}

impl GatewayError {
    pub fn new(code: ErrorCode, detail: impl Into<String>) -> Self {
        Self {
            code,
            detail: detail.into(),
        }
    }

    pub fn http_status(&self) -> u16 {
        self.code.http_status()
    }

    /// Parses the `code: detail` text carried in error bodies and frames.
    pub fn parse(text: &str) -> Option<Self> {
        let (code, detail) = match text.split_once(':') {
            Some((code, detail)) => (code, detail.strip_prefix(' ').unwrap_or(detail)),
            None => (text, ""),
        };
        Some(Self::new(code.trim().parse().ok()?, detail))
    }
}

impl From<CodecError> for GatewayError {
    fn from(e: CodecError) -> Self {
        let code = match &e {
            CodecError::XmlMalformed(_) => ErrorCode::InvalidXml,
            CodecError::GrammarViolation(_) | CodecError::InvariantViolation(_) => ErrorCode::GrammarViolation,
            CodecError::UnsupportedVersion(_) => ErrorCode::UnsupportedVersion,
            CodecError::Oversize { .. } => ErrorCode::Oversize,
        };
        Self::new(code, e.to_string())
    }
}

impl From<CryptoError> for GatewayError {
    fn from(e: CryptoError) -> Self {
        match e {
            CryptoError::Codec(inner) => inner.into(),
            other => Self::new(ErrorCode::DecryptFailure, other.to_string()),
        }
    }
}

impl From<RegistryError> for GatewayError {
    fn from(e: RegistryError) -> Self {
        let code = match &e {
            RegistryError::UnknownService(_) => ErrorCode::UnknownService,
            RegistryError::UnknownFunction { .. } => ErrorCode::UnknownFunction,
            _ => ErrorCode::BackendFailure,
        };
        Self::new(code, e.to_string())
    }
}

impl From<AdapterError> for GatewayError {
    fn from(e: AdapterError) -> Self {
        let code = match &e {
            AdapterError::BackendUnreachable(_) => ErrorCode::BackendUnreachable,
            AdapterError::Timeout(_) => ErrorCode::Timeout,
            AdapterError::SoapFault(_) | AdapterError::MalformedSoap(_) | AdapterError::BackendFailure(_) => {
                ErrorCode::BackendFailure
            }
        };
        Self::new(code, e.to_string())
    }
}
