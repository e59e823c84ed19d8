//! ECL message codec: typed model, XML parsing and serialization, and the
//! request/response grammar checks.
//!
//! Input is UTF-8 XML; an XML declaration is accepted but never emitted.
//! Element text is whitespace-trimmed on parse. Serialization produces the
//! canonical layout (one element per line, two-space indent) and re-validates
//! its own output, so a serialized message always parses back to the same value.

mod grammar;
mod model;
pub mod text;

use roxmltree::{Document, Node};

pub use grammar::{Grammar, REQUEST_SEQUENCE, RESPONSE_SEQUENCE};
pub use model::{
    EclRequest, EclResponse, MessageKind, Param, ParamType, ReturnType, Rule, UnknownTypeName, ValidationReport,
    Violation, ECL_VERSION,
};

pub(crate) use grammar::{element_text, is_ecl};

/// Namespace of XML-Enc elements.
pub const XMLENC_NS: &str = "http://www.w3.org/2001/04/xmlenc#";

pub const DEFAULT_MAX_SIZE: usize = 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecOptions {
    /// Enables the lexical checks on IPs, version, stamp and typed values.
    pub strict: bool,
    /// Upper bound on document size in bytes.
    pub max_size: usize,
}

impl Default for CodecOptions {
    fn default() -> Self {
        Self {
            strict: true,
            max_size: DEFAULT_MAX_SIZE,
        }
    }
}

impl CodecOptions {
    pub fn lax() -> Self {
        Self {
            strict: false,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("malformed XML: {0}")]
    XmlMalformed(String),
    #[error("grammar violation:\n{0}")]
    GrammarViolation(ValidationReport),
    #[error("unsupported ECL version `{0}`")]
    UnsupportedVersion(String),
    #[error("message breaks type invariants:\n{0}")]
    InvariantViolation(ValidationReport),
    #[error("document of {size} bytes exceeds the {limit} byte limit")]
    Oversize { size: usize, limit: usize },
}

pub(crate) fn parse_xml<'i>(xml: &'i str, opts: &CodecOptions) -> Result<Document<'i>, CodecError> {
    if xml.len() > opts.max_size {
        return Err(CodecError::Oversize {
            size: xml.len(),
            limit: opts.max_size,
        });
    }
    let parse_opts = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    Document::parse_with_options(xml, parse_opts).map_err(|e| CodecError::XmlMalformed(e.to_string()))
}

fn report_to_error(report: ValidationReport, root: Node<'_, '_>) -> CodecError {
    if report.violations().iter().all(|v| v.rule == Rule::Version) {
        CodecError::UnsupportedVersion(text_of(root, "version"))
    } else {
        CodecError::GrammarViolation(report)
    }
}

fn child<'a, 'i>(root: Node<'a, 'i>, name: &str) -> Node<'a, 'i> {
    root.children()
        .find(|c| is_ecl(*c, name))
        .unwrap_or_else(|| panic!("validated document lacks `{name}`"))
}

fn text_of(root: Node<'_, '_>, name: &str) -> String {
    element_text(child(root, name))
}

fn id_of(root: Node<'_, '_>, name: &str) -> u64 {
    text_of(root, name).parse().expect("validated id is an integer")
}

/// Parses and validates a request with strict checks on.
pub fn parse_request(xml: &str) -> Result<EclRequest, CodecError> {
    parse_request_with(xml, &CodecOptions::default())
}

pub fn parse_request_with(xml: &str, opts: &CodecOptions) -> Result<EclRequest, CodecError> {
    let doc = parse_xml(xml, opts)?;
    let root = doc.root_element();
    let report = grammar::check_document(root, Grammar::Request, opts.strict);
    if !report.ok() {
        return Err(report_to_error(report, root));
    }
    let params_node = child(root, "functionParams");
    let items: Vec<_> = params_node.children().filter(|c| c.is_element()).collect();
    let params = items
        .chunks_exact(3)
        .map(|t| Param {
            name: element_text(t[0]),
            value: element_text(t[1]),
            ptype: element_text(t[2]).parse().expect("validated type"),
        })
        .collect();
    Ok(EclRequest {
        source_ip: text_of(root, "sourceIP"),
        destination_ip: text_of(root, "destinationIP"),
        source_id: id_of(root, "sourceID"),
        destination_id: id_of(root, "destinationID"),
        function_invoked: text_of(root, "functionInvoked"),
        params,
        stamp: text_of(root, "stamp"),
        version: text_of(root, "version"),
    })
}

pub fn parse_response(xml: &str) -> Result<EclResponse, CodecError> {
    parse_response_with(xml, &CodecOptions::default())
}

pub fn parse_response_with(xml: &str, opts: &CodecOptions) -> Result<EclResponse, CodecError> {
    let doc = parse_xml(xml, opts)?;
    let root = doc.root_element();
    let report = grammar::check_document(root, Grammar::Response, opts.strict);
    if !report.ok() {
        return Err(report_to_error(report, root));
    }
    Ok(EclResponse {
        source_ip: text_of(root, "sourceIP"),
        destination_ip: text_of(root, "destinationIP"),
        source_id: id_of(root, "sourceID"),
        destination_id: id_of(root, "destinationID"),
        return_value: text_of(root, "returnValue"),
        return_type: text_of(root, "returnType").parse().expect("validated type"),
        stamp: text_of(root, "stamp"),
        version: text_of(root, "version"),
    })
}

fn validate_bytes(xml: &[u8], grammar: Grammar, opts: &CodecOptions) -> ValidationReport {
    let mut report = ValidationReport::new();
    let text = match std::str::from_utf8(xml) {
        Ok(t) => t,
        Err(e) => {
            report.push(Rule::WellFormed, "/", format!("input is not UTF-8: {e}"));
            return report;
        }
    };
    match parse_xml(text, opts) {
        Ok(doc) => grammar::check_document(doc.root_element(), grammar, opts.strict),
        Err(e) => {
            report.push(Rule::WellFormed, "/", e.to_string());
            report
        }
    }
}

/// Checks arbitrary bytes against the request grammar. Never fails; problems
/// are reported as violations.
pub fn validate_request(xml: impl AsRef<[u8]>) -> ValidationReport {
    validate_request_with(xml, &CodecOptions::default())
}

pub fn validate_request_with(xml: impl AsRef<[u8]>, opts: &CodecOptions) -> ValidationReport {
    validate_bytes(xml.as_ref(), Grammar::Request, opts)
}

pub fn validate_response(xml: impl AsRef<[u8]>) -> ValidationReport {
    validate_response_with(xml, &CodecOptions::default())
}

pub fn validate_response_with(xml: impl AsRef<[u8]>, opts: &CodecOptions) -> ValidationReport {
    validate_bytes(xml.as_ref(), Grammar::Response, opts)
}

const METADATA: [&str; 6] = [
    "sourceIP",
    "destinationIP",
    "sourceID",
    "destinationID",
    "stamp",
    "version",
];

fn payload_head(xml: &str) -> Result<Option<(Option<String>, String)>, CodecError> {
    let doc = parse_xml(
        xml,
        &CodecOptions {
            max_size: usize::MAX,
            ..CodecOptions::default()
        },
    )?;
    let root = doc.root_element();
    if !is_ecl(root, "protocol") {
        return Ok(None);
    }
    Ok(root
        .children()
        .filter(|c| c.is_element())
        .find(|c| !(c.tag_name().namespace().is_none() && METADATA.contains(&c.tag_name().name())))
        .map(|c| {
            (
                c.tag_name().namespace().map(str::to_string),
                c.tag_name().name().to_string(),
            )
        }))
}

/// Classifies a document by what sits in payload position. Encrypted payloads
/// are reported as [`MessageKind::EncryptedRequest`], the view of a gateway
/// receiving traffic; see [`detect_reply_kind`] for the client side.
pub fn detect_kind(xml: &str) -> Result<MessageKind, CodecError> {
    Ok(match payload_head(xml)? {
        Some((None, name)) if name == "functionInvoked" || name == "functionParams" => MessageKind::Request,
        Some((None, name)) if name == "returnValue" || name == "returnType" => MessageKind::Response,
        Some((Some(ns), name)) if ns == XMLENC_NS && name == "EncryptedData" => MessageKind::EncryptedRequest,
        _ => MessageKind::Unknown,
    })
}

/// Like [`detect_kind`], but reads encrypted payloads as responses.
pub fn detect_reply_kind(xml: &str) -> Result<MessageKind, CodecError> {
    Ok(match detect_kind(xml)? {
        MessageKind::EncryptedRequest => MessageKind::EncryptedResponse,
        other => other,
    })
}

struct Writer {
    out: String,
}

impl Writer {
    fn new() -> Self {
        Self {
            out: String::from("<protocol>\n"),
        }
    }

    fn leaf(&mut self, indent: usize, name: &str, value: &str) {
        for _ in 0..indent {
            self.out.push_str("  ");
        }
        self.out.push('<');
        self.out.push_str(name);
        self.out.push('>');
        self.out.push_str(&text::escape_text(value));
        self.out.push_str("</");
        self.out.push_str(name);
        self.out.push_str(">\n");
    }

    fn raw(&mut self, s: &str) {
        self.out.push_str(s);
    }

    fn finish(mut self) -> String {
        self.out.push_str("</protocol>\n");
        self.out
    }
}

fn check_text_fields<'a>(fields: impl IntoIterator<Item = (&'static str, &'a str)>) -> ValidationReport {
    let mut report = ValidationReport::new();
    for (name, value) in fields {
        let path = format!("/protocol/{name}");
        if value.trim() != value {
            report.push(
                Rule::Whitespace,
                path.clone(),
                "text has leading or trailing whitespace",
            );
        }
        if let Some(c) = value.chars().find(|c| !text::is_xml_char(*c)) {
            report.push(
                Rule::XmlChar,
                path,
                format!("character U+{:04X} cannot appear in XML", c as u32),
            );
        }
    }
    report
}

pub(crate) fn render_metadata_head(
    w: &mut String,
    source_ip: &str,
    destination_ip: &str,
    source_id: u64,
    destination_id: u64,
) {
    let mut inner = Writer { out: String::new() };
    inner.leaf(1, "sourceIP", source_ip);
    inner.leaf(1, "destinationIP", destination_ip);
    inner.leaf(1, "sourceID", &source_id.to_string());
    inner.leaf(1, "destinationID", &destination_id.to_string());
    w.push_str(&inner.out);
}

pub(crate) fn render_metadata_tail(w: &mut String, stamp: &str, version: &str) {
    let mut inner = Writer { out: String::new() };
    inner.leaf(1, "stamp", stamp);
    inner.leaf(1, "version", version);
    w.push_str(&inner.out);
}

/// Canonical text of the `<functionInvoked>` element, at the given indent.
pub(crate) fn render_function_invoked(req: &EclRequest, indent: usize) -> String {
    let mut w = Writer { out: String::new() };
    w.leaf(indent, "functionInvoked", &req.function_invoked);
    w.out
}

/// Canonical text of the `<functionParams>` element, at the given indent.
pub(crate) fn render_function_params(req: &EclRequest, indent: usize) -> String {
    let pad = "  ".repeat(indent);
    let mut w = Writer { out: String::new() };
    if req.params.is_empty() {
        w.raw(&format!("{pad}<functionParams/>\n"));
    } else {
        w.raw(&format!("{pad}<functionParams>\n"));
        for p in &req.params {
            w.leaf(indent + 1, "name", &p.name);
            w.leaf(indent + 1, "value", &p.value);
            w.leaf(indent + 1, "type", p.ptype.as_str());
        }
        w.raw(&format!("{pad}</functionParams>\n"));
    }
    w.out
}

pub(crate) fn render_return_value(resp: &EclResponse, indent: usize) -> String {
    let mut w = Writer { out: String::new() };
    w.leaf(indent, "returnValue", &resp.return_value);
    w.out
}

pub(crate) fn render_return_type(resp: &EclResponse, indent: usize) -> String {
    let mut w = Writer { out: String::new() };
    w.leaf(indent, "returnType", resp.return_type.as_str());
    w.out
}

fn render_request(req: &EclRequest) -> String {
    let mut w = Writer::new();
    render_metadata_head(
        &mut w.out,
        &req.source_ip,
        &req.destination_ip,
        req.source_id,
        req.destination_id,
    );
    w.raw(&render_function_invoked(req, 1));
    w.raw(&render_function_params(req, 1));
    render_metadata_tail(&mut w.out, &req.stamp, &req.version);
    w.finish()
}

fn render_response(resp: &EclResponse) -> String {
    let mut w = Writer::new();
    render_metadata_head(
        &mut w.out,
        &resp.source_ip,
        &resp.destination_ip,
        resp.source_id,
        resp.destination_id,
    );
    w.raw(&render_return_value(resp, 1));
    w.raw(&render_return_type(resp, 1));
    render_metadata_tail(&mut w.out, &resp.stamp, &resp.version);
    w.finish()
}

fn request_text_fields(req: &EclRequest) -> Vec<(&'static str, &str)> {
    let mut fields = vec![
        ("sourceIP", req.source_ip.as_str()),
        ("destinationIP", req.destination_ip.as_str()),
        ("functionInvoked", req.function_invoked.as_str()),
        ("stamp", req.stamp.as_str()),
        ("version", req.version.as_str()),
    ];
    for p in &req.params {
        fields.push(("functionParams/name", p.name.as_str()));
        fields.push(("functionParams/value", p.value.as_str()));
    }
    fields
}

/// Canonical serialization of a request. Strict invariants apply.
pub fn serialize_request(req: &EclRequest) -> Result<String, CodecError> {
    serialize_request_with(req, &CodecOptions::default())
}

pub fn serialize_request_with(req: &EclRequest, opts: &CodecOptions) -> Result<String, CodecError> {
    let mut report = check_text_fields(request_text_fields(req));
    if !report.ok() {
        return Err(CodecError::InvariantViolation(report));
    }
    let out = render_request(req);
    report.extend(validate_request_with(
        &out,
        &CodecOptions {
            max_size: usize::MAX,
            ..*opts
        },
    ));
    if report.ok() {
        Ok(out)
    } else {
        Err(CodecError::InvariantViolation(report))
    }
}

pub fn serialize_response(resp: &EclResponse) -> Result<String, CodecError> {
    serialize_response_with(resp, &CodecOptions::default())
}

pub fn serialize_response_with(resp: &EclResponse, opts: &CodecOptions) -> Result<String, CodecError> {
    let mut report = check_text_fields([
        ("sourceIP", resp.source_ip.as_str()),
        ("destinationIP", resp.destination_ip.as_str()),
        ("returnValue", resp.return_value.as_str()),
        ("stamp", resp.stamp.as_str()),
        ("version", resp.version.as_str()),
    ]);
    if !report.ok() {
        return Err(CodecError::InvariantViolation(report));
    }
    let out = render_response(resp);
    report.extend(validate_response_with(
        &out,
        &CodecOptions {
            max_size: usize::MAX,
            ..*opts
        },
    ));
    if report.ok() {
        Ok(out)
    } else {
        Err(CodecError::InvariantViolation(report))
    }
}
