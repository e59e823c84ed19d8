//! Static service registry: what the gateway knows about each destination.
//!
//! ```xml
//! <registry>
//!   <service id="2" name="DICTIONARY" ip="192.168.1.6" protocol="soap" soapNamespace="urn:ecl:dictionary">
//!     <backend host="127.0.0.1" port="9001" path="/ws"/>
//!     <function name="whatIs" returns="string"><param name="word" type="string"/></function>
//!   </service>
//! </registry>
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use roxmltree::Node;

use crate::codec::{text, EclRequest, ParamType, ReturnType, Rule, ValidationReport};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("registry parse error: {0}")]
    ParseError(String),
    #[error("duplicate service id {0}")]
    DuplicateServiceId(u64),
    #[error("service {0} lists no backends")]
    EmptyBackends(u64),
    #[error("service {service}: duplicate function `{function}`")]
    DuplicateFunction { service: u64, function: String },
    #[error("function `{function}`: duplicate parameter `{param}`")]
    DuplicateParam { function: String, param: String },
    #[error("unknown attribute `{attribute}` on <{element}>")]
    UnknownAttribute { element: String, attribute: String },
    #[error("no service with id {0}")]
    UnknownService(u64),
    #[error("service `{service}` has no function `{function}`")]
    UnknownFunction { service: String, function: String },
}

/// Protocol spoken by a service; selects the adapter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdapterKind {
    Soap,
    Rest,
    Socket,
}

impl AdapterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AdapterKind::Soap => "soap",
            AdapterKind::Rest => "rest",
            AdapterKind::Socket => "socket",
        }
    }
}

impl fmt::Display for AdapterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdapterKind {
    type Err = RegistryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "soap" => Ok(AdapterKind::Soap),
            "rest" => Ok(AdapterKind::Rest),
            "socket" => Ok(AdapterKind::Socket),
            other => Err(RegistryError::ParseError(format!("unknown protocol `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Endpoint {
    pub host: String,
    pub port: u16,
    /// URL path prefix for HTTP-based services.
    pub path: Option<String>,
}

impl Endpoint {
    pub fn new(host: impl Into<String>, port: u16) -> Self {
        Self {
            host: host.into(),
            port,
            path: None,
        }
    }

    pub fn with_path(mut self, path: impl Into<String>) -> Self {
        self.path = Some(path.into());
        self
    }

    pub fn authority(&self) -> String {
        format!("{}:{}", self.host, self.port)
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}{}", self.host, self.port, self.path.as_deref().unwrap_or(""))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSig {
    pub name: String,
    pub params: Vec<(String, ParamType)>,
    pub return_type: ReturnType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceRecord {
    pub service_id: u64,
    pub name: String,
    /// The IP clients put in `destinationIP`.
    pub advertised_ip: String,
    pub protocol: AdapterKind,
    pub backends: Vec<Endpoint>,
    pub soap_namespace: Option<String>,
    pub functions: Vec<FunctionSig>,
}

impl ServiceRecord {
    /// Namespace bound to the `m:` prefix in SOAP bodies.
    pub fn soap_namespace(&self) -> String {
        self.soap_namespace
            .clone()
            .unwrap_or_else(|| format!("urn:ecl:service:{}", self.service_id))
    }
}

/// Immutable snapshot of all known services, keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    services: BTreeMap<u64, ServiceRecord>,
}

impl Registry {
    pub fn from_records(records: impl IntoIterator<Item = ServiceRecord>) -> Result<Self, RegistryError> {
        let mut services = BTreeMap::new();
        for r in records {
            validate_record(&r)?;
            let id = r.service_id;
            if services.insert(id, r).is_some() {
                return Err(RegistryError::DuplicateServiceId(id));
            }
        }
        Ok(Self { services })
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }

    pub fn services(&self) -> impl Iterator<Item = &ServiceRecord> {
        self.services.values()
    }

    pub fn lookup(&self, destination_id: u64) -> Result<&ServiceRecord, RegistryError> {
        self.services
            .get(&destination_id)
            .ok_or(RegistryError::UnknownService(destination_id))
    }
}

fn validate_record(r: &ServiceRecord) -> Result<(), RegistryError> {
    if r.backends.is_empty() {
        return Err(RegistryError::EmptyBackends(r.service_id));
    }
    let mut names = HashSet::new();
    for f in &r.functions {
        if !names.insert(f.name.as_str()) {
            return Err(RegistryError::DuplicateFunction {
                service: r.service_id,
                function: f.name.clone(),
            });
        }
        let mut params = HashSet::new();
        for (p, _) in &f.params {
            if !params.insert(p.as_str()) {
                return Err(RegistryError::DuplicateParam {
                    function: f.name.clone(),
                    param: p.clone(),
                });
            }
        }
    }
    Ok(())
}

struct Attrs<'a, 'i> {
    node: Node<'a, 'i>,
}

impl<'a, 'i> Attrs<'a, 'i> {
    fn check_known(&self, known: &[&str], strict: bool) -> Result<(), RegistryError> {
        if !strict {
            return Ok(());
        }
        for a in self.node.attributes() {
            if a.namespace().is_some() || !known.contains(&a.name()) {
                return Err(RegistryError::UnknownAttribute {
                    element: self.node.tag_name().name().to_string(),
                    attribute: a.name().to_string(),
                });
            }
        }
        Ok(())
    }

    fn required(&self, name: &str) -> Result<&'a str, RegistryError> {
        self.node.attribute(name).ok_or_else(|| {
            RegistryError::ParseError(format!(
                "<{}> is missing attribute `{name}`",
                self.node.tag_name().name()
            ))
        })
    }

    fn parsed<T: FromStr>(&self, name: &str) -> Result<T, RegistryError> {
        let raw = self.required(name)?;
        raw.trim().parse().map_err(|_| {
            RegistryError::ParseError(format!(
                "<{}> attribute `{name}` has invalid value `{raw}`",
                self.node.tag_name().name()
            ))
        })
    }
}

fn elements<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Result<Vec<Node<'a, 'i>>, RegistryError> {
    let mut out = Vec::new();
    for c in node.children().filter(|c| c.is_element()) {
        if c.tag_name().name() != name {
            return Err(RegistryError::ParseError(format!(
                "unexpected <{}> inside <{}>",
                c.tag_name().name(),
                node.tag_name().name()
            )));
        }
        out.push(c);
    }
    Ok(out)
}

fn parse_function(node: Node<'_, '_>, strict: bool) -> Result<FunctionSig, RegistryError> {
    let attrs = Attrs { node };
    attrs.check_known(&["name", "returns"], strict)?;
    let return_type: ReturnType = attrs
        .required("returns")?
        .parse()
        .map_err(|e| RegistryError::ParseError(format!("function return type: {e}")))?;
    let params = elements(node, "param")?
        .into_iter()
        .map(|p| {
            let a = Attrs { node: p };
            a.check_known(&["name", "type"], strict)?;
            let ty: ParamType = a
                .required("type")?
                .parse()
                .map_err(|e| RegistryError::ParseError(format!("param type: {e}")))?;
            Ok((a.required("name")?.to_string(), ty))
        })
        .collect::<Result<_, RegistryError>>()?;
    Ok(FunctionSig {
        name: attrs.required("name")?.to_string(),
        params,
        return_type,
    })
}

fn parse_service(node: Node<'_, '_>, strict: bool) -> Result<ServiceRecord, RegistryError> {
    let attrs = Attrs { node };
    attrs.check_known(&["id", "name", "ip", "protocol", "soapNamespace"], strict)?;
    let service_id: u64 = attrs.parsed("id")?;
    let advertised_ip = attrs.required("ip")?.to_string();
    if strict && !text::is_ipv4(&advertised_ip) {
        return Err(RegistryError::ParseError(format!(
            "service {service_id}: `{advertised_ip}` is not a dotted-quad IPv4 address"
        )));
    }
    let mut backends = Vec::new();
    let mut functions = Vec::new();
    for c in node.children().filter(|c| c.is_element()) {
        match c.tag_name().name() {
            "backend" => {
                let a = Attrs { node: c };
                a.check_known(&["host", "port", "path"], strict)?;
                backends.push(Endpoint {
                    host: a.required("host")?.to_string(),
                    port: a.parsed("port")?,
                    path: c.attribute("path").map(str::to_string),
                });
            }
            "function" => functions.push(parse_function(c, strict)?),
            other => {
                return Err(RegistryError::ParseError(format!(
                    "unexpected <{other}> inside <service>"
                )))
            }
        }
    }
    Ok(ServiceRecord {
        service_id,
        name: attrs.required("name")?.to_string(),
        advertised_ip,
        protocol: attrs.required("protocol")?.parse()?,
        backends,
        soap_namespace: node.attribute("soapNamespace").map(str::to_string),
        functions,
    })
}

/// Loads a registry file in strict mode.
pub fn load_registry(file_text: &str) -> Result<Registry, RegistryError> {
    load_registry_with(file_text, true)
}

pub fn load_registry_with(file_text: &str, strict: bool) -> Result<Registry, RegistryError> {
    let doc = roxmltree::Document::parse(file_text).map_err(|e| RegistryError::ParseError(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "registry" {
        return Err(RegistryError::ParseError(format!(
            "document element must be <registry>, found <{}>",
            root.tag_name().name()
        )));
    }
    Attrs { node: root }.check_known(&[], strict)?;
    let records = elements(root, "service")?
        .into_iter()
        .map(|s| parse_service(s, strict))
        .collect::<Result<Vec<_>, _>>()?;
    Registry::from_records(records)
}

pub fn lookup(registry: &Registry, destination_id: u64) -> Result<&ServiceRecord, RegistryError> {
    registry.lookup(destination_id)
}

pub fn resolve_function<'r>(record: &'r ServiceRecord, function_name: &str) -> Result<&'r FunctionSig, RegistryError> {
    record
        .functions
        .iter()
        .find(|f| f.name == function_name)
        .ok_or_else(|| RegistryError::UnknownFunction {
            service: record.name.clone(),
            function: function_name.to_string(),
        })
}

/// Positional, name-checked match of a request's parameters against a signature.
pub fn check_signature(req: &EclRequest, sig: &FunctionSig) -> ValidationReport {
    let mut report = ValidationReport::new();
    if req.params.len() != sig.params.len() {
        report.push(
            Rule::SignatureArity,
            "/protocol/functionParams",
            format!(
                "`{}` takes {} parameter(s), request carries {}",
                sig.name,
                sig.params.len(),
                req.params.len()
            ),
        );
    }
    for (i, (param, (name, ty))) in req.params.iter().zip(&sig.params).enumerate() {
        let path = format!("/protocol/functionParams/name[{}]", i + 1);
        if &param.name != name {
            report.push(
                Rule::SignatureName,
                path.clone(),
                format!("parameter {} must be `{name}`, found `{}`", i + 1, param.name),
            );
        }
        if param.ptype != *ty {
            report.push(
                Rule::SignatureType,
                path,
                format!("parameter `{name}` must be {ty}, found {}", param.ptype),
            );
        }
    }
    report
}

/// Strict-mode consistency check of `destinationIP` against the record.
pub fn check_destination(req: &EclRequest, record: &ServiceRecord) -> ValidationReport {
    let mut report = ValidationReport::new();
    if req.destination_ip != record.advertised_ip {
        report.push(
            Rule::DestinationIp,
            "/protocol/destinationIP",
            format!(
                "service {} is advertised at {}, request addressed {}",
                record.service_id, record.advertised_ip, req.destination_ip
            ),
        );
    }
    report
}
