//! ECL ⇄ SOAP translation.
//!
//! Envelopes use the `/2001/12/` envelope and encoding URIs. The call is a
//! single `m:{function}` element under `soap:Body` with one `m:{param}` child
//! per parameter, in signature order; array items become repeated children.

use roxmltree::Node;

use super::{build_response, AdapterError};
use crate::clock::Clock;
use crate::codec::text::{escape_attr, escape_text, split_array};
use crate::codec::{EclRequest, EclResponse};
use crate::registry::{FunctionSig, ServiceRecord};

pub const ENVELOPE_NS: &str = "http://www.w3.org/2001/12/soap-envelope";
pub const ENCODING_STYLE: &str = "http://www.w3.org/2001/12/soap-encoding";
pub const CONTENT_TYPE: &str = "application/soap+xml";

/// Wraps `body` (already-serialized XML) in a SOAP envelope.
pub fn envelope(body: &str) -> String {
    format!(
        "<?xml version=\"1.0\"?>\n<soap:Envelope xmlns:soap=\"{ENVELOPE_NS}\" soap:encodingStyle=\"{ENCODING_STYLE}\">\n  <soap:Body>\n{body}  </soap:Body>\n</soap:Envelope>\n"
    )
}

pub fn translate_to_soap(req: &EclRequest, sig: &FunctionSig, ns: &str) -> String {
    let f = &sig.name;
    let ns = escape_attr(ns);
    let mut children = String::new();
    for (param, (name, ty)) in req.params.iter().zip(&sig.params) {
        let items = if ty.is_array() {
            split_array(&param.value).unwrap_or_default()
        } else {
            vec![param.value.clone()]
        };
        for item in items {
            children.push_str(&format!("      <m:{name}>{}</m:{name}>\n", escape_text(&item)));
        }
    }
    let body = if children.is_empty() {
        format!("    <m:{f} xmlns:m=\"{ns}\"/>\n")
    } else {
        format!("    <m:{f} xmlns:m=\"{ns}\">\n{children}    </m:{f}>\n")
    };
    envelope(&body)
}

fn soap_child<'a, 'i>(node: Node<'a, 'i>, local: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == local)
}

/// Text of a fault's reason, for SOAP 1.1 (`faultstring`) or 1.2 (`Reason/Text`).
fn fault_reason(fault: Node<'_, '_>) -> String {
    fault
        .descendants()
        .find(|n| n.is_element() && matches!(n.tag_name().name(), "faultstring" | "Text"))
        .map(|n| n.text().unwrap_or_default().trim().to_string())
        .unwrap_or_else(|| "SOAP fault".to_string())
}

/// Extracts the return value from a response envelope. The Body child must be
/// named `{function}Response`, compared case-insensitively.
pub fn soap_return_value(envelope_xml: &str, function: &str) -> Result<String, AdapterError> {
    let doc = roxmltree::Document::parse(envelope_xml).map_err(|e| AdapterError::MalformedSoap(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "Envelope" {
        return Err(AdapterError::MalformedSoap(format!(
            "document element is <{}>, not Envelope",
            root.tag_name().name()
        )));
    }
    let body = soap_child(root, "Body").ok_or_else(|| AdapterError::MalformedSoap("envelope has no Body".into()))?;
    let call = body
        .children()
        .find(|c| c.is_element())
        .ok_or_else(|| AdapterError::MalformedSoap("Body is empty".into()))?;
    let name = call.tag_name().name();
    if name == "Fault" {
        return Err(AdapterError::SoapFault(fault_reason(call)));
    }
    let expected = format!("{function}Response");
    if !name.eq_ignore_ascii_case(&expected) {
        return Err(AdapterError::MalformedSoap(format!(
            "Body child <{name}> does not answer `{function}`"
        )));
    }
    let value = call
        .children()
        .find(|c| c.is_element())
        .ok_or_else(|| AdapterError::MalformedSoap(format!("<{name}> carries no return element")))?;
    let text: String = value.children().filter_map(|c| c.text()).collect();
    Ok(text.trim().to_string())
}

pub fn translate_soap_response(
    envelope_xml: &str,
    original: &EclRequest,
    sig: &FunctionSig,
    record: &ServiceRecord,
    clock: &dyn Clock,
) -> Result<EclResponse, AdapterError> {
    let value = soap_return_value(envelope_xml, &sig.name)?;
    Ok(build_response(value, original, sig, record, clock))
}

/// A SOAP 1.2 fault envelope.
pub fn fault_envelope(code: &str, reason: &str) -> String {
    envelope(&format!(
        "    <soap:Fault>\n      <soap:Code><soap:Value>soap:{}</soap:Value></soap:Code>\n      <soap:Reason><soap:Text>{}</soap:Text></soap:Reason>\n    </soap:Fault>\n",
        escape_text(code),
        escape_text(reason)
    ))
}
