//! ECL ⇄ REST translation: `GET {path}/{function}?name=value&…`.

use std::fmt;

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};

use super::{build_response, AdapterError};
use crate::clock::Clock;
use crate::codec::{EclRequest, EclResponse};
use crate::registry::{Endpoint, FunctionSig, ServiceRecord};

/// Everything but RFC 3986 unreserved characters is escaped.
const COMPONENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestRequest {
    pub method: &'static str,
    /// Path and query, e.g. `/ws/whatIs?word=apple`.
    pub target: String,
}

impl fmt::Display for RestRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.method, self.target)
    }
}

fn encode(s: &str) -> String {
    utf8_percent_encode(s, COMPONENT).to_string()
}

pub fn translate_to_rest(req: &EclRequest, sig: &FunctionSig, backend: &Endpoint) -> RestRequest {
    let prefix = backend.path.as_deref().unwrap_or("").trim_end_matches('/');
    let mut target = format!("{prefix}/{}", encode(&sig.name));
    let query: Vec<String> = req
        .params
        .iter()
        .zip(&sig.params)
        .map(|(p, (name, _))| format!("{}={}", encode(name), encode(&p.value)))
        .collect();
    if !query.is_empty() {
        target.push('?');
        target.push_str(&query.join("&"));
    }
    RestRequest { method: "GET", target }
}

pub fn translate_rest_response(
    status: u16,
    body: &str,
    original: &EclRequest,
    sig: &FunctionSig,
    record: &ServiceRecord,
    clock: &dyn Clock,
) -> Result<EclResponse, AdapterError> {
    if status != 200 {
        return Err(AdapterError::BackendFailure(format!(
            "REST backend answered HTTP {status}"
        )));
    }
    Ok(build_response(body.to_string(), original, sig, record, clock))
}
