//! ECL ⇄ line protocol over TCP.
//!
//! Request: `{function} {v1},{v2},…\n`, each value escaped like an array item
//! (`\,` and `\\`, plus `\n`/`\r` so a value cannot end the line).
//! Response: one line holding the return value.

use super::{build_response, AdapterError};
use crate::clock::Clock;
use crate::codec::{EclRequest, EclResponse};
use crate::registry::{FunctionSig, ServiceRecord};

pub fn escape_value(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            ',' => out.push_str("\\,"),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

/// Inverse of [`escape_value`] over a whole argument field: splits on
/// unescaped commas. Returns `None` on a bad escape.
pub fn split_args(field: &str) -> Option<Vec<String>> {
    if field.is_empty() {
        return Some(Vec::new());
    }
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next()? {
                ',' => cur.push(','),
                '\\' => cur.push('\\'),
                'n' => cur.push('\n'),
                'r' => cur.push('\r'),
                _ => return None,
            },
            ',' => out.push(std::mem::take(&mut cur)),
            c => cur.push(c),
        }
    }
    out.push(cur);
    Some(out)
}

pub fn translate_to_socket(req: &EclRequest, sig: &FunctionSig) -> Vec<u8> {
    let args: Vec<String> = req
        .params
        .iter()
        .take(sig.params.len())
        .map(|p| escape_value(&p.value))
        .collect();
    format!("{} {}\n", sig.name, args.join(",")).into_bytes()
}

/// `line` is the raw reply; it must end in a newline.
pub fn translate_socket_response(
    line: &[u8],
    original: &EclRequest,
    sig: &FunctionSig,
    record: &ServiceRecord,
    clock: &dyn Clock,
) -> Result<EclResponse, AdapterError> {
    let Some(body) = line.strip_suffix(b"\n") else {
        return Err(AdapterError::BackendFailure(
            "socket reply is missing its terminating newline".into(),
        ));
    };
    let body = body.strip_suffix(b"\r").unwrap_or(body);
    let text =
        std::str::from_utf8(body).map_err(|_| AdapterError::BackendFailure("socket reply is not UTF-8".into()))?;
    Ok(build_response(text.to_string(), original, sig, record, clock))
}
