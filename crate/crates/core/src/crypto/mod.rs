//! Payload encryption for ECL messages.
//!
//! Only the payload elements are encrypted (`functionInvoked`/`functionParams`
//! of a request, `returnValue`/`returnType` of a response). Each one is
//! replaced in place by an XML-Enc `EncryptedData` block holding
//! base64(IV ‖ 3DES-EDE-CBC(PKCS#7(element UTF-8))). Metadata stays in the clear.

mod des;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use rand::RngCore;
use roxmltree::Node;

use crate::codec::{
    self, is_ecl, CodecError, CodecOptions, EclRequest, EclResponse, Rule, ValidationReport, XMLENC_NS,
};

pub use des::{tdes_decrypt_block, tdes_encrypt_block, Des, TripleDesKey};

pub const ELEMENT_TYPE_URI: &str = "http://www.w3.org/2001/04/xmlenc#Element";

/// Environment variable holding the hex-encoded ecosystem key.
pub const KEY_ENV: &str = "ECL_KEY";

const BLOCK: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("Triple-DES key must be 24 bytes, got {0}")]
    BadKeyLength(usize),
    #[error("key is not valid hex: {0}")]
    BadHexKey(String),
    #[error("CipherValue is not valid base64")]
    BadBase64,
    #[error("ciphertext of {0} bytes is too short (need IV plus at least one block)")]
    CiphertextTooShort(usize),
    #[error("bad padding (wrong key or corrupted ciphertext)")]
    BadPadding,
    #[error("decrypted payload is not UTF-8")]
    BadUtf8,
    #[error("plaintext is not a single XML element: {0}")]
    NotAnElement(String),
    #[error("malformed EncryptedData: {0}")]
    MalformedEncryptedData(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Source of CBC initialization vectors. Implementations must tolerate
/// concurrent draws.
pub trait IvSource: Send + Sync {
    fn next_iv(&self) -> [u8; 8];
}

/// Fresh IVs from the operating system RNG.
#[derive(Debug, Default, Clone, Copy)]
pub struct RandomIv;

impl IvSource for RandomIv {
    fn next_iv(&self) -> [u8; 8] {
        let mut iv = [0u8; 8];
        rand::rngs::OsRng.fill_bytes(&mut iv);
        iv
    }
}

/// Always returns the same IV. Test hook only; reusing an IV leaks equality
/// of plaintext prefixes.
#[derive(Debug, Clone, Copy)]
pub struct FixedIv(pub [u8; 8]);

impl IvSource for FixedIv {
    fn next_iv(&self) -> [u8; 8] {
        self.0
    }
}

fn cbc_encrypt(plain: &[u8], key: &TripleDesKey, iv: [u8; 8]) -> Vec<u8> {
    let pad = BLOCK - plain.len() % BLOCK;
    let mut data = plain.to_vec();
    data.resize(plain.len() + pad, pad as u8);
    let mut out = Vec::with_capacity(BLOCK + data.len());
    out.extend_from_slice(&iv);
    let mut prev = iv;
    for chunk in data.chunks_exact(BLOCK) {
        let mut block = [0u8; 8];
        for (b, (p, c)) in block.iter_mut().zip(chunk.iter().zip(prev)) {
            *b = p ^ c;
        }
        prev = key.encrypt_block(block);
        out.extend_from_slice(&prev);
    }
    out
}

fn cbc_decrypt(raw: &[u8], key: &TripleDesKey) -> Result<Vec<u8>, CryptoError> {
    if raw.len() < 2 * BLOCK {
        return Err(CryptoError::CiphertextTooShort(raw.len()));
    }
    if !raw.len().is_multiple_of(BLOCK) {
        return Err(CryptoError::BadPadding);
    }
    let (iv, body) = raw.split_at(BLOCK);
    let mut prev: [u8; 8] = iv.try_into().unwrap();
    let mut out = Vec::with_capacity(body.len());
    for chunk in body.chunks_exact(BLOCK) {
        let block: [u8; 8] = chunk.try_into().unwrap();
        let plain = key.decrypt_block(block);
        out.extend(plain.iter().zip(prev).map(|(p, c)| p ^ c));
        prev = block;
    }
    let pad = usize::from(*out.last().unwrap());
    if pad == 0 || pad > BLOCK || !out[out.len() - pad..].iter().all(|&b| usize::from(b) == pad) {
        return Err(CryptoError::BadPadding);
    }
    out.truncate(out.len() - pad);
    Ok(out)
}

/// An XML-Enc `EncryptedData` block standing in for one payload element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedPayload {
    pub cipher_value: String,
}

impl EncryptedPayload {
    pub fn to_xml(&self) -> String {
        format!(
            "<EncryptedData Type='{ELEMENT_TYPE_URI}' xmlns='{XMLENC_NS}'><CipherData><CipherValue>{}</CipherValue></CipherData></EncryptedData>",
            self.cipher_value
        )
    }

    /// Reads an `EncryptedData` element. An `EncryptionMethod` child is tolerated.
    pub fn from_node(node: Node<'_, '_>) -> Result<Self, CryptoError> {
        let enc = |n: &Node<'_, '_>, name: &str| {
            n.is_element() && n.tag_name().namespace() == Some(XMLENC_NS) && n.tag_name().name() == name
        };
        if !enc(&node, "EncryptedData") {
            return Err(CryptoError::MalformedEncryptedData(format!(
                "expected EncryptedData, found `{}`",
                node.tag_name().name()
            )));
        }
        match node.attribute("Type") {
            Some(ELEMENT_TYPE_URI) => {}
            other => {
                return Err(CryptoError::MalformedEncryptedData(format!(
                    "unexpected Type {other:?}"
                )))
            }
        }
        let cipher_data = node
            .children()
            .find(|c| enc(c, "CipherData"))
            .ok_or_else(|| CryptoError::MalformedEncryptedData("missing CipherData".into()))?;
        let value = cipher_data
            .children()
            .find(|c| enc(c, "CipherValue"))
            .ok_or_else(|| CryptoError::MalformedEncryptedData("missing CipherValue".into()))?;
        let text: String = value
            .children()
            .filter_map(|c| c.text())
            .flat_map(|t| t.chars())
            .filter(|c| !c.is_whitespace())
            .collect();
        Ok(Self { cipher_value: text })
    }

    pub fn from_xml(xml: &str) -> Result<Self, CryptoError> {
        let doc = codec::parse_xml(xml, &CodecOptions::default())?;
        Self::from_node(doc.root_element())
    }
}

/// Encrypts one element under a fresh random IV.
pub fn encrypt_element(element_xml: &str, key: &TripleDesKey) -> Result<EncryptedPayload, CryptoError> {
    encrypt_element_with(element_xml, key, &RandomIv)
}

pub fn encrypt_element_with(
    element_xml: &str,
    key: &TripleDesKey,
    iv: &dyn IvSource,
) -> Result<EncryptedPayload, CryptoError> {
    roxmltree::Document::parse(element_xml).map_err(|e| CryptoError::NotAnElement(e.to_string()))?;
    let raw = cbc_encrypt(element_xml.as_bytes(), key, iv.next_iv());
    Ok(EncryptedPayload {
        cipher_value: BASE64.encode(raw),
    })
}

pub fn decrypt_element(payload: &EncryptedPayload, key: &TripleDesKey) -> Result<String, CryptoError> {
    let raw = BASE64
        .decode(payload.cipher_value.as_bytes())
        .map_err(|_| CryptoError::BadBase64)?;
    let plain = cbc_decrypt(&raw, key)?;
    String::from_utf8(plain).map_err(|_| CryptoError::BadUtf8)
}

fn encrypted_document(
    head: &str,
    payload: [String; 2],
    tail: &str,
    key: &TripleDesKey,
    iv: &dyn IvSource,
) -> Result<String, CryptoError> {
    let mut out = String::from("<protocol>\n");
    out.push_str(head);
    for element in payload {
        let block = encrypt_element_with(element.trim_end(), key, iv)?;
        out.push_str("  ");
        out.push_str(&block.to_xml());
        out.push('\n');
    }
    out.push_str(tail);
    out.push_str("</protocol>\n");
    Ok(out)
}

pub fn encrypt_request_payload(req: &EclRequest, key: &TripleDesKey) -> Result<String, CryptoError> {
    encrypt_request_payload_with(req, key, &RandomIv, &CodecOptions::default())
}

pub fn encrypt_request_payload_with(
    req: &EclRequest,
    key: &TripleDesKey,
    iv: &dyn IvSource,
    opts: &CodecOptions,
) -> Result<String, CryptoError> {
    codec::serialize_request_with(req, opts)?;
    let mut head = String::new();
    codec::render_metadata_head(
        &mut head,
        &req.source_ip,
        &req.destination_ip,
        req.source_id,
        req.destination_id,
    );
    let mut tail = String::new();
    codec::render_metadata_tail(&mut tail, &req.stamp, &req.version);
    encrypted_document(
        &head,
        [
            codec::render_function_invoked(req, 0),
            codec::render_function_params(req, 0),
        ],
        &tail,
        key,
        iv,
    )
}

pub fn encrypt_response_payload(resp: &EclResponse, key: &TripleDesKey) -> Result<String, CryptoError> {
    encrypt_response_payload_with(resp, key, &RandomIv, &CodecOptions::default())
}

pub fn encrypt_response_payload_with(
    resp: &EclResponse,
    key: &TripleDesKey,
    iv: &dyn IvSource,
    opts: &CodecOptions,
) -> Result<String, CryptoError> {
    codec::serialize_response_with(resp, opts)?;
    let mut head = String::new();
    codec::render_metadata_head(
        &mut head,
        &resp.source_ip,
        &resp.destination_ip,
        resp.source_id,
        resp.destination_id,
    );
    let mut tail = String::new();
    codec::render_metadata_tail(&mut tail, &resp.stamp, &resp.version);
    encrypted_document(
        &head,
        [codec::render_return_value(resp, 0), codec::render_return_type(resp, 0)],
        &tail,
        key,
        iv,
    )
}

/// Replaces every `EncryptedData` child of `protocol` with its plaintext and
/// checks that the decrypted elements are exactly `payload`, in order.
fn decrypt_document(
    xml: &str,
    key: &TripleDesKey,
    payload: [&str; 2],
    opts: &CodecOptions,
) -> Result<String, CryptoError> {
    let doc = codec::parse_xml(xml, opts)?;
    let root = doc.root_element();
    if !is_ecl(root, "protocol") {
        let mut report = ValidationReport::new();
        report.push(Rule::Root, "/", "document element must be `protocol`");
        return Err(CodecError::GrammarViolation(report).into());
    }
    let mut out = String::from("<protocol>\n");
    let mut decrypted_names = Vec::new();
    for child in root.children().filter(|c| c.is_element()) {
        let is_block = child.tag_name().namespace() == Some(XMLENC_NS) && child.tag_name().name() == "EncryptedData";
        out.push_str("  ");
        if is_block {
            let plain = decrypt_element(&EncryptedPayload::from_node(child)?, key)?;
            let element = roxmltree::Document::parse(&plain).map_err(|e| CryptoError::NotAnElement(e.to_string()))?;
            decrypted_names.push(element.root_element().tag_name().name().to_string());
            out.push_str(plain.trim());
        } else {
            out.push_str(&xml[child.range()]);
        }
        out.push('\n');
    }
    out.push_str("</protocol>\n");
    if decrypted_names != payload {
        let mut report = ValidationReport::new();
        report.push(
            Rule::ElementOrder,
            "/protocol/EncryptedData",
            format!(
                "encrypted payload must be {} then {}, found {:?}",
                payload[0], payload[1], decrypted_names
            ),
        );
        return Err(CodecError::GrammarViolation(report).into());
    }
    Ok(out)
}

/// Decrypts an encrypted request into a plaintext request document.
pub fn decrypt_request_document(xml: &str, key: &TripleDesKey, opts: &CodecOptions) -> Result<String, CryptoError> {
    decrypt_document(xml, key, ["functionInvoked", "functionParams"], opts)
}

pub fn decrypt_response_document(xml: &str, key: &TripleDesKey, opts: &CodecOptions) -> Result<String, CryptoError> {
    decrypt_document(xml, key, ["returnValue", "returnType"], opts)
}

pub fn decrypt_request_payload(xml: &str, key: &TripleDesKey) -> Result<EclRequest, CryptoError> {
    let opts = CodecOptions::default();
    let plain = decrypt_request_document(xml, key, &opts)?;
    Ok(codec::parse_request_with(&plain, &opts)?)
}

pub fn decrypt_response_payload(xml: &str, key: &TripleDesKey) -> Result<EclResponse, CryptoError> {
    let opts = CodecOptions::default();
    let plain = decrypt_response_document(xml, key, &opts)?;
    Ok(codec::parse_response_with(&plain, &opts)?)
}
