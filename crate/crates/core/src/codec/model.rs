//! Typed in-memory forms of ECL messages.

use std::fmt;
use std::str::FromStr;

/// The only protocol version this implementation speaks.
pub const ECL_VERSION: &str = "1.0";

/// Data type of a request parameter. The textual names are the six values
/// the request grammar enumerates for `<type>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamType {
    Int,
    Double,
    String,
    IntArray,
    DoubleArray,
    StringArray,
}

impl ParamType {
    pub const ALL: [ParamType; 6] = [
        ParamType::Int,
        ParamType::Double,
        ParamType::String,
        ParamType::IntArray,
        ParamType::DoubleArray,
        ParamType::StringArray,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamType::Int => "int",
            ParamType::Double => "double",
            ParamType::String => "string",
            ParamType::IntArray => "int[]",
            ParamType::DoubleArray => "double[]",
            ParamType::StringArray => "string[]",
        }
    }

    pub fn is_array(self) -> bool {
        matches!(
            self,
            ParamType::IntArray | ParamType::DoubleArray | ParamType::StringArray
        )
    }

    /// Scalar type of the items of an array type, or the type itself.
    pub fn item_type(self) -> ParamType {
        match self {
            ParamType::IntArray => ParamType::Int,
            ParamType::DoubleArray => ParamType::Double,
            ParamType::StringArray => ParamType::String,
            scalar => scalar,
        }
    }
}

impl fmt::Display for ParamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown type name `{0}`")]
pub struct UnknownTypeName(pub String);

impl FromStr for ParamType {
    type Err = UnknownTypeName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParamType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownTypeName(s.to_string()))
    }
}

/// Data type of a returned value. Responses never carry arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReturnType {
    Int,
    Double,
    String,
}

impl ReturnType {
    pub const ALL: [ReturnType; 3] = [ReturnType::Int, ReturnType::Double, ReturnType::String];

    pub fn as_str(self) -> &'static str {
        match self {
            ReturnType::Int => "int",
            ReturnType::Double => "double",
            ReturnType::String => "string",
        }
    }

    pub fn as_param_type(self) -> ParamType {
        match self {
            ReturnType::Int => ParamType::Int,
            ReturnType::Double => ParamType::Double,
            ReturnType::String => ParamType::String,
        }
    }
}

impl fmt::Display for ReturnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReturnType {
    type Err = UnknownTypeName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReturnType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownTypeName(s.to_string()))
    }
}

/// One `(name, value, type)` triple of `<functionParams>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub value: String,
    pub ptype: ParamType,
}

impl Param {
    pub fn new(name: impl Into<String>, value: impl Into<String>, ptype: ParamType) -> Self {
        Self {
            name: name.into(),
            value: value.into(),
            ptype,
        }
    }
}

/// An ECL request: routing metadata plus the function call payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EclRequest {
    pub source_ip: String,
    pub destination_ip: String,
    pub source_id: u64,
    pub destination_id: u64,
    pub function_invoked: String,
    pub params: Vec<Param>,
    pub stamp: String,
    pub version: String,
}

/// An ECL response: routing metadata plus the returned value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EclResponse {
    pub source_ip: String,
    pub destination_ip: String,
    pub source_id: u64,
    pub destination_id: u64,
    pub return_value: String,
    pub return_type: ReturnType,
    pub stamp: String,
    pub version: String,
}

/// Stable identifier of a validation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Input is not UTF-8 or not well-formed XML.
    WellFormed,
    /// Document element is not an unprefixed `protocol`.
    Root,
    UnknownElement,
    MissingElement,
    DuplicateElement,
    ElementOrder,
    /// Character data where only element content is allowed.
    MixedContent,
    /// ECL elements declare no attributes.
    Attribute,
    /// Child elements inside a #PCDATA element.
    TextOnly,
    /// `functionParams` children are not a sequence of `(name, value, type)`.
    ParamsTriple,
    ParamType,
    ReturnType,
    IdInteger,
    EmptyName,
    IpSyntax,
    Version,
    StampFormat,
    ValueType,
    SignatureArity,
    SignatureName,
    SignatureType,
    DestinationIp,
    Whitespace,
    XmlChar,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::WellFormed => "well-formed",
            Rule::Root => "root",
            Rule::UnknownElement => "unknown-element",
            Rule::MissingElement => "missing-element",
            Rule::DuplicateElement => "duplicate-element",
            Rule::ElementOrder => "element-order",
            Rule::MixedContent => "mixed-content",
            Rule::Attribute => "attribute",
            Rule::TextOnly => "text-only",
            Rule::ParamsTriple => "params-triple",
            Rule::ParamType => "param-type",
            Rule::ReturnType => "return-type",
            Rule::IdInteger => "id-integer",
            Rule::EmptyName => "empty-name",
            Rule::IpSyntax => "ip-syntax",
            Rule::Version => "version",
            Rule::StampFormat => "stamp-format",
            Rule::ValueType => "value-type",
            Rule::SignatureArity => "signature-arity",
            Rule::SignatureName => "signature-name",
            Rule::SignatureType => "signature-type",
            Rule::DestinationIp => "destination-ip",
            Rule::Whitespace => "whitespace",
            Rule::XmlChar => "xml-char",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    /// Slash path to the offending element, e.g. `/protocol/functionParams/type[2]`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.rule, self.path, self.message)
    }
}

/// Outcome of a grammar check. A report is ok exactly when it holds no violations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn push(&mut self, rule: Rule, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            rule,
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn has_rule(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub fn rules(&self) -> Vec<Rule> {
        self.violations.iter().map(|v| v.rule).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// What a document looks like before it is validated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Request,
    EncryptedRequest,
    Response,
    EncryptedResponse,
    Unknown,
}

impl MessageKind {
    pub fn is_encrypted(self) -> bool {
        matches!(self, MessageKind::EncryptedRequest | MessageKind::EncryptedResponse)
    }
}
